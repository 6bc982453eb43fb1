# antifragile_rl/__init__.py
# Expose main classes and functions for easy import

__version__ = "0.1.0"

# Exceptions
from .exceptions import (
    DegenerateGeometryError,
    StartPositionError,
    EpisodeFinishedError,
    TrainingDivergedError,
    EnsembleEmptyError,
    ConfigError,
    CheckpointMissingError,
    CalibrationMissingError
)

# Flow field
from .flowfield import IfdsParams, ObstacleShape, ObstacleKinematics, FlowField

# Environment
from .environment import (
    AgentObs,
    EpisodeConfig,
    RewardWeights,
    Scenario,
    StepOutcome,
    UavDeconflictionEnv,
    load_scenario,
    make_env
)

# Networks
from .neural import Mlp, AdamOptimizer, RunningMeanStd

# Attacks
from .attacks import AttackConfig, ObservationAttacker, fgsm, pgd_attack, fw_attack

# Robust training
from .robust_rl import (
    RobustPolicyPair,
    TrainingConfig,
    TrainingResult,
    EnsembleSet,
    build_ensemble,
    entropy_gap
)

# Value-distribution shift
from .shift import ShiftReport, wasserstein1, bernoulli_params, shift_vector

# Switching
from .bandit import (
    DiscountedThompsonSampler,
    ThompsonSampler,
    EpsilonGreedySampler,
    UcbSampler,
    make_sampler,
    RewardSchedule,
    run_switching,
    deploy_switching
)

# Harness
from .harness import ExperimentConfig, EvalMetrics, evaluate_policy, load_config

__all__ = [
    '__version__',
    'DegenerateGeometryError',
    'StartPositionError',
    'EpisodeFinishedError',
    'TrainingDivergedError',
    'EnsembleEmptyError',
    'ConfigError',
    'CheckpointMissingError',
    'CalibrationMissingError',
    'IfdsParams',
    'ObstacleShape',
    'ObstacleKinematics',
    'FlowField',
    'AgentObs',
    'EpisodeConfig',
    'RewardWeights',
    'Scenario',
    'StepOutcome',
    'UavDeconflictionEnv',
    'load_scenario',
    'make_env',
    'Mlp',
    'AdamOptimizer',
    'RunningMeanStd',
    'AttackConfig',
    'ObservationAttacker',
    'fgsm',
    'pgd_attack',
    'fw_attack',
    'RobustPolicyPair',
    'TrainingConfig',
    'TrainingResult',
    'EnsembleSet',
    'build_ensemble',
    'entropy_gap',
    'ShiftReport',
    'wasserstein1',
    'bernoulli_params',
    'shift_vector',
    'DiscountedThompsonSampler',
    'ThompsonSampler',
    'EpsilonGreedySampler',
    'UcbSampler',
    'make_sampler',
    'RewardSchedule',
    'run_switching',
    'deploy_switching',
    'ExperimentConfig',
    'EvalMetrics',
    'evaluate_policy',
    'load_config'
]
