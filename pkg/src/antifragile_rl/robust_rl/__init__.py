"""
Robust actor-critic training: replay, policy pairs, trainers and ensembles.
"""

from .replay import Experience, Batch, ReplayBuffer
from .agents import (
    RobustPolicyPair,
    compose_action,
    mixed_action,
    critic_target,
    critic_loss,
    policy_gradients
)
from .entropy import EntropyGapReport, reward_entropy, entropy_gap
from .trainers import (
    TRAINER_KINDS,
    TrainingConfig,
    TrainingResult,
    EpisodeRecord,
    DdpgTrainer,
    train_vanilla_ddpg,
    train_action_robust,
    train_pr_mdp,
    train_nr_mdp,
    train_adversarial_ddpg,
    EnsembleMember,
    EnsembleSet,
    build_ensemble
)

__all__ = [
    'Experience',
    'Batch',
    'ReplayBuffer',
    'RobustPolicyPair',
    'compose_action',
    'mixed_action',
    'critic_target',
    'critic_loss',
    'policy_gradients',
    'EntropyGapReport',
    'reward_entropy',
    'entropy_gap',
    'TRAINER_KINDS',
    'TrainingConfig',
    'TrainingResult',
    'EpisodeRecord',
    'DdpgTrainer',
    'train_vanilla_ddpg',
    'train_action_robust',
    'train_pr_mdp',
    'train_nr_mdp',
    'train_adversarial_ddpg',
    'EnsembleMember',
    'EnsembleSet',
    'build_ensemble'
]
