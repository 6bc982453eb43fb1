"""
Online policy switching in the attacked environment.

The live policy is chosen by a sampler over the ensemble arms (vanilla
first). After every decision the sampler is fed r̃, the Bernoulli
parameter of the chosen arm computed from value-distribution shifts on a
sliding window of recently received observations; until the window holds
two states the calibrated parameters stand in.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..attacks import AttackConfig
from ..environment import UavDeconflictionEnv
from ..exceptions import CalibrationMissingError
from ..harness.metrics import EVAL_EPISODES, EVAL_STREAMS, EvalMetrics, MetricsRecorder, \
    evaluate_policy, make_attacker
from ..robust_rl.agents import RobustPolicyPair
from ..robust_rl.trainers import EnsembleSet
from ..shift import DEFAULT_K_MULT, ShiftReport, shift_vector
from ..utils.helpers import SeedLike, spawn_generators
from ..utils.validation import require_int
from .samplers import Sampler

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 32
_DEPLOY_STREAMS = EVAL_STREAMS + ("sampler", "shift")


@dataclass
class DeploymentResult:
    """Metrics of a switched run plus the per-step arm choices and fed rewards."""

    metrics: EvalMetrics
    selections: List[int] = field(default_factory=list)
    r_tilde: List[float] = field(default_factory=list)
    episode_of_step: List[int] = field(default_factory=list)
    alphas: List[float] = field(default_factory=list)

    def selection_histogram(self) -> pd.Series:
        n_arms = max(len(self.alphas), max(self.selections, default=-1) + 1)
        counts = np.bincount(np.asarray(self.selections, dtype=int), minlength=n_arms)
        index = self.alphas if len(self.alphas) == n_arms else list(range(n_arms))
        return pd.Series(counts, index=pd.Index(index, name="alpha"), name="selections")

    def to_frame(self) -> pd.DataFrame:
        """One row per step; r_tilde is filled only for per-step switching."""
        frame = pd.DataFrame({"episode": self.episode_of_step, "arm": self.selections})
        frame["r_tilde"] = self.r_tilde if len(self.r_tilde) == len(frame) else np.nan
        return frame


def nearest_report(calibration: Union[ShiftReport, Sequence[ShiftReport], None],
                   epsilon: float) -> ShiftReport:
    """Calibrated report whose attack strength is closest to ``epsilon``."""
    if calibration is None:
        raise CalibrationMissingError("Switching needs calibrated shift reports")
    if isinstance(calibration, ShiftReport):
        return calibration
    reports = list(calibration)
    if not reports:
        raise CalibrationMissingError("Switching needs calibrated shift reports")
    return min(reports, key=lambda r: (abs(r.epsilon - epsilon), r.epsilon))


class OnlineShiftFeed:
    """
    r̃ source backed by a sliding window of clean observations.

    The window holds the states as they were before the deployment attack.
    It is attacked with the configured attack against the vanilla arm and
    each arm's own clean-vs-attacked shift is mapped to Bernoulli parameters.
    """

    def __init__(self,
                 arms: Sequence[RobustPolicyPair],
                 attack: AttackConfig,
                 fallback: ShiftReport,
                 window: int = DEFAULT_WINDOW,
                 k_mult: float = DEFAULT_K_MULT):
        if len(fallback.p_true) != len(arms):
            raise ValueError(f"Calibration has {len(fallback.p_true)} arms, ensemble has {len(arms)}")
        self.arms = list(arms)
        self.attack = attack
        self.fallback = fallback
        self.window: Deque[np.ndarray] = deque(maxlen=require_int("window", window))
        self.k_mult = k_mult
        self.refreshes = 0

    def observe(self, obs: np.ndarray) -> None:
        self.window.append(np.asarray(obs, dtype=float))

    def clear(self) -> None:
        self.window.clear()

    def p_true(self, rng: np.random.Generator) -> List[float]:
        if len(self.window) < 2:
            return list(self.fallback.p_true)
        report = shift_vector(self.arms[1:], self.arms[0], np.vstack(self.window),
                              self.attack.epsilon, self.attack, rng,
                              reference="own", k_mult=self.k_mult)
        self.refreshes += 1
        return report.p_true

    def reward_for(self, arm: int, rng: np.random.Generator) -> float:
        return float(self.p_true(rng)[arm])


def deploy_switching(ensemble: Union[EnsembleSet, Sequence[RobustPolicyPair]],
                     env: UavDeconflictionEnv,
                     attack: Optional[AttackConfig],
                     sampler: Sampler,
                     episodes: int = EVAL_EPISODES,
                     calibration: Union[ShiftReport, Sequence[ShiftReport], None] = None,
                     seed: SeedLike = 0,
                     window: int = DEFAULT_WINDOW,
                     per_episode: bool = False,
                     k_mult: float = DEFAULT_K_MULT) -> DeploymentResult:
    """
    Evaluate the ensemble with the sampler choosing the acting policy.

    Args:
        ensemble: Arms, vanilla first
        env: Evaluation environment (re-seeded from ``seed``)
        attack: Observation attack, crafted against the vanilla arm
        sampler: Fresh sampler with one arm per policy
        episodes: Number of episodes
        calibration: Offline shift report(s); the one nearest the attack
            strength seeds r̃ until the window fills
        seed: Seed for the environment, attack, sampler and shift streams
        window: Sliding-window length in steps
        per_episode: Choose once per episode instead of every step
        k_mult: Success probability of the best arm

    Returns:
        DeploymentResult; a single-policy ensemble reproduces
        :func:`evaluate_policy` for that policy
    """
    arms = ensemble.pairs if isinstance(ensemble, EnsembleSet) else list(ensemble)
    if not arms:
        raise ValueError("Ensemble must not be empty")
    attack = attack if attack is not None else AttackConfig(kind="none")
    report = nearest_report(calibration, attack.epsilon)
    if len(arms) == 1:
        metrics = evaluate_policy(arms[0], env, attack, episodes, seed)
        episode_of_step = [e for e, n in enumerate(metrics.steps) for _ in range(n)]
        return DeploymentResult(metrics, [0] * len(episode_of_step), [], episode_of_step,
                                [arms[0].alpha])

    if sampler.n_arms != len(arms):
        raise ValueError(f"Sampler has {sampler.n_arms} arms, ensemble has {len(arms)}")
    require_int("episodes", episodes)

    rngs = spawn_generators(seed, _DEPLOY_STREAMS)
    env.seed(rngs["env"])
    attacker = make_attacker(attack, arms[0])
    feed = OnlineShiftFeed(arms, attack, report, window, k_mult)
    recorder = MetricsRecorder()
    result = DeploymentResult(recorder.metrics, alphas=[a.alpha for a in arms])
    sampler.reset()

    for episode in range(episodes):
        obs = env.reset().as_array()
        feed.clear()
        arm = sampler.select(rngs["sampler"])
        while True:
            seen = attacker.perturb(obs, rngs["attack"])
            feed.observe(obs)
            outcome = env.step(arms[arm].act(seen))
            recorder.record_step(outcome)
            result.selections.append(arm)
            result.episode_of_step.append(episode)

            if not per_episode:
                r_tilde = feed.reward_for(arm, rngs["shift"])
                sampler.update(arm, r_tilde, rngs["sampler"])
                result.r_tilde.append(r_tilde)
            if outcome.done:
                break
            obs = outcome.next_obs.as_array()
            if not per_episode:
                arm = sampler.select(rngs["sampler"])

        if per_episode:
            r_tilde = feed.reward_for(arm, rngs["shift"])
            sampler.update(arm, r_tilde, rngs["sampler"])
            result.r_tilde.append(r_tilde)
        recorder.end_episode(env, outcome.reached_goal)

    metrics = recorder.metrics
    logger.info(f"Switched ({sampler.kind}) over {len(arms)} arms: mean reward "
                f"{metrics.mean_reward:.3f}, conflict-free {metrics.conflict_free}/{episodes}")
    return result


__all__ = [
    "DEFAULT_WINDOW",
    "DeploymentResult",
    "OnlineShiftFeed",
    "nearest_report",
    "deploy_switching",
]
