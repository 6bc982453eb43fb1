"""
Evaluation metrics for fixed and switched policies.

:class:`MetricsRecorder` accumulates per-episode rewards, conflicts,
intrusions and path lengths; :func:`evaluate_policy` drives one policy
through attacked evaluation episodes with it. Switched deployments reuse
the same recorder so the tables line up.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from ..attacks import AttackConfig, ObservationAttacker
from ..environment import StepOutcome, UavDeconflictionEnv
from ..robust_rl.agents import RobustPolicyPair
from ..shift import attack_config_for
from ..utils.helpers import SeedLike, spawn_generators
from ..utils.validation import require_int

logger = logging.getLogger(__name__)

EVAL_EPISODES = 100

# evaluation streams; deployment appends its own after these
EVAL_STREAMS = ("env", "attack")

METRIC_COLUMNS = ["episode", "reward", "steps", "conflicts", "intrusions",
                  "reached_goal", "path_length"]


@dataclass
class EvalMetrics:
    """Per-episode evaluation results."""

    rewards: List[float] = field(default_factory=list)
    steps: List[int] = field(default_factory=list)
    conflicts: List[int] = field(default_factory=list)
    intrusions: List[int] = field(default_factory=list)
    reached_goal: List[bool] = field(default_factory=list)
    path_lengths: List[float] = field(default_factory=list)

    @property
    def episodes(self) -> int:
        return len(self.rewards)

    @property
    def mean_reward(self) -> float:
        return float(np.mean(self.rewards)) if self.rewards else float("nan")

    @property
    def total_conflicts(self) -> int:
        return int(sum(self.conflicts))

    @property
    def conflict_free(self) -> int:
        """Episodes without a single conflict step."""
        return int(sum(1 for c in self.conflicts if c == 0))

    @property
    def conflict_free_rate(self) -> float:
        return self.conflict_free / self.episodes if self.episodes else float("nan")

    @property
    def total_intrusions(self) -> int:
        return int(sum(self.intrusions))

    @property
    def mean_path_length(self) -> float:
        return float(np.mean(self.path_lengths)) if self.path_lengths else float("nan")

    @property
    def goal_rate(self) -> float:
        return float(np.mean(self.reached_goal)) if self.reached_goal else float("nan")

    def summary(self) -> Dict[str, Any]:
        return {
            "episodes": self.episodes,
            "mean_reward": self.mean_reward,
            "total_conflicts": self.total_conflicts,
            "conflict_free": self.conflict_free,
            "total_intrusions": self.total_intrusions,
            "mean_path_length": self.mean_path_length,
            "goal_rate": self.goal_rate,
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "episode": np.arange(self.episodes),
            "reward": self.rewards,
            "steps": self.steps,
            "conflicts": self.conflicts,
            "intrusions": self.intrusions,
            "reached_goal": self.reached_goal,
            "path_length": self.path_lengths,
        }, columns=METRIC_COLUMNS)


class MetricsRecorder:
    """Step-by-step accumulator that closes one :class:`EvalMetrics` row per episode."""

    def __init__(self):
        self.metrics = EvalMetrics()
        self._reward = 0.0
        self._conflicts = 0
        self._intrusions = 0

    def record_step(self, outcome: StepOutcome) -> None:
        self._reward += outcome.reward
        self._conflicts += int(outcome.conflict)
        self._intrusions += int(outcome.intrusion)

    def end_episode(self, env: UavDeconflictionEnv, reached_goal: bool) -> None:
        m = self.metrics
        m.rewards.append(self._reward)
        m.steps.append(env.steps)
        m.conflicts.append(self._conflicts)
        m.intrusions.append(self._intrusions)
        m.reached_goal.append(bool(reached_goal))
        m.path_lengths.append(env.path_length)
        self._reward = 0.0
        self._conflicts = 0
        self._intrusions = 0


def make_attacker(attack: Optional[AttackConfig],
                  target: RobustPolicyPair) -> ObservationAttacker:
    """Attacker whose gradient comes from ``target``'s actor loss."""
    cfg = attack if attack is not None else AttackConfig(kind="none")
    return ObservationAttacker(attack_config_for(target, cfg), target.attack_loss_gradient)


def evaluate_policy(policy: RobustPolicyPair,
                    env: UavDeconflictionEnv,
                    attack: Optional[AttackConfig] = None,
                    episodes: int = EVAL_EPISODES,
                    seed: SeedLike = 0,
                    attack_target: Optional[RobustPolicyPair] = None) -> EvalMetrics:
    """
    Run the agent head of ``policy`` for ``episodes`` attacked episodes.

    Args:
        policy: Pair whose agent head acts
        env: Evaluation environment (re-seeded from ``seed``)
        attack: Observation attack applied every step; None for clean runs
        episodes: Number of episodes
        seed: Seed for the environment and attack streams
        attack_target: Pair whose actor loss drives gradient attacks
            (defaults to ``policy``)

    Returns:
        EvalMetrics with one row per episode
    """
    require_int("episodes", episodes)
    rngs = spawn_generators(seed, EVAL_STREAMS)
    env.seed(rngs["env"])
    attacker = make_attacker(attack, attack_target or policy)
    recorder = MetricsRecorder()

    for _ in range(episodes):
        obs = env.reset().as_array()
        while True:
            seen = attacker.perturb(obs, rngs["attack"])
            outcome = env.step(policy.act(seen))
            recorder.record_step(outcome)
            if outcome.done:
                break
            obs = outcome.next_obs.as_array()
        recorder.end_episode(env, outcome.reached_goal)

    metrics = recorder.metrics
    logger.info(f"Evaluated {policy.kind} alpha={policy.alpha:.2f}: mean reward "
                f"{metrics.mean_reward:.3f}, conflict-free {metrics.conflict_free}/{episodes}")
    return metrics


__all__ = [
    "EVAL_EPISODES",
    "EVAL_STREAMS",
    "METRIC_COLUMNS",
    "EvalMetrics",
    "MetricsRecorder",
    "make_attacker",
    "evaluate_policy",
]
