"""
Synthetic switching runs against piecewise-stationary Bernoulli schedules.

A :class:`RewardSchedule` lists segments of (duration, success
probabilities); :func:`run_switching` plays a sampler against it and
records the regret with respect to the best arm of the active segment.
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..utils.helpers import SeedLike, seed_sequence, spawn_generators
from ..utils.validation import require_int
from .samplers import DtsConfig, Sampler, make_sampler

logger = logging.getLogger(__name__)

CANONICAL_STEPS_PER_LEVEL = 800
_STREAMS = ("sampler", "reward")


def load_calibration_fixture(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Calibration rows shipped with the package, or read from ``path``."""
    if path is None:
        resource = resources.files("antifragile_rl") / "data" / "calibration_fixture.json"
        return json.loads(resource.read_text(encoding="utf-8"))
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RewardSchedule:
    """Piecewise-constant success probabilities, one segment per attack level."""

    segments: Tuple[Tuple[int, Tuple[float, ...]], ...]
    labels: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.segments:
            raise ValueError("A schedule needs at least one segment")
        cleaned = []
        width = None
        for duration, p_true in self.segments:
            duration = require_int("duration", duration)
            p = tuple(float(v) for v in p_true)
            if width is None:
                width = len(p)
            if len(p) != width or width == 0:
                raise ValueError("Every segment must give one probability per arm")
            if any(not 0.0 <= v <= 1.0 for v in p):
                raise ValueError(f"Probabilities must lie in [0, 1], got {p}")
            cleaned.append((duration, p))
        object.__setattr__(self, "segments", tuple(cleaned))
        if self.labels and len(self.labels) != len(cleaned):
            raise ValueError("labels must match the number of segments")
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def stationary(cls, p_true: Sequence[float], steps: int) -> "RewardSchedule":
        return cls(((steps, tuple(p_true)),))

    @classmethod
    def from_calibration(cls,
                         fixture: Optional[Mapping[str, Any]] = None,
                         steps_per_level: Optional[int] = None,
                         alphas: Optional[Sequence[float]] = None) -> "RewardSchedule":
        """
        One segment per calibrated attack level, in file order.

        ``alphas`` keeps only those arms (matched against the fixture's
        ``alphas`` row) in the given order; by default every arm is kept.
        """
        fixture = fixture if fixture is not None else load_calibration_fixture()
        steps = steps_per_level or int(fixture.get("steps_per_level", CANONICAL_STEPS_PER_LEVEL))
        levels = fixture["levels"]
        columns = None
        if alphas is not None:
            known = [round(float(a), 6) for a in fixture["alphas"]]
            missing = [a for a in alphas if round(float(a), 6) not in known]
            if missing:
                raise ValueError(f"Alphas {missing} are not in the calibration fixture {fixture['alphas']}")
            columns = [known.index(round(float(a), 6)) for a in alphas]
        rows = [row["p_true"] if columns is None else [row["p_true"][c] for c in columns]
                for row in levels]
        return cls(tuple((steps, tuple(p)) for p in rows),
                   tuple(f"epsilon={row['epsilon']}" for row in levels))

    @classmethod
    def canonical(cls) -> "RewardSchedule":
        """
        Five levels of 800 steps over the fixture's ``switching_alphas``.

        These are the two robust policies that trade the lead at every
        attack level.
        """
        fixture = load_calibration_fixture()
        return cls.from_calibration(fixture, alphas=fixture.get("switching_alphas"))

    @property
    def n_arms(self) -> int:
        return len(self.segments[0][1])

    @property
    def total_steps(self) -> int:
        return sum(d for d, _ in self.segments)

    @property
    def boundaries(self) -> List[int]:
        """First step of every segment after the first."""
        return list(np.cumsum([d for d, _ in self.segments])[:-1])

    def as_arrays(self, steps: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Per-step (T, K) probability matrix and segment index vector."""
        steps = steps or self.total_steps
        if steps > self.total_steps:
            raise ValueError(f"Schedule covers {self.total_steps} steps, {steps} requested")
        durations = [d for d, _ in self.segments]
        index = np.repeat(np.arange(len(self.segments)), durations)[:steps]
        table = np.array([p for _, p in self.segments])
        return table[index], index

    def p_at(self, t: int) -> Tuple[float, ...]:
        if not 0 <= t < self.total_steps:
            raise IndexError(f"Step {t} outside the schedule")
        for duration, p in self.segments:
            if t < duration:
                return p
            t -= duration
        raise IndexError(f"Step {t} outside the schedule")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "segments": [{"duration": d, "p_true": list(p)} for d, p in self.segments],
            "labels": list(self.labels),
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "RewardSchedule":
        return cls(tuple((int(s["duration"]), tuple(s["p_true"])) for s in raw["segments"]),
                   tuple(raw.get("labels", ())))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RewardSchedule":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

@dataclass
class RegretTrace:
    """Chosen arm, Bernoulli reward and instantaneous regret per step."""

    arms: np.ndarray
    rewards: np.ndarray
    regret: np.ndarray
    segments: np.ndarray
    sampler: str = ""
    seed: Optional[int] = None

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.regret)

    @property
    def total_regret(self) -> float:
        return float(self.regret.sum())

    def __len__(self) -> int:
        return self.arms.size

    def selection_frequency(self, arm: int, start: int = 0, stop: Optional[int] = None) -> float:
        window = self.arms[start:stop]
        return float(np.mean(window == arm)) if window.size else 0.0

    def selection_histogram(self, n_arms: int) -> np.ndarray:
        return np.bincount(self.arms, minlength=n_arms)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "step": np.arange(len(self)),
            "segment": self.segments,
            "arm": self.arms,
            "reward": self.rewards,
            "regret": self.regret,
            "cumulative_regret": self.cumulative,
        })


def run_switching(sampler: Sampler,
                  schedule: RewardSchedule,
                  steps: Optional[int] = None,
                  seed: SeedLike = 0) -> RegretTrace:
    """
    Play ``sampler`` for ``steps`` rounds against ``schedule``.

    Each round the sampler picks an arm, a Bernoulli reward is drawn from the
    active segment and fed back as r̃, and the regret against the segment's
    best probability is logged. The sampler is reset first.
    """
    if sampler.n_arms != schedule.n_arms:
        raise ValueError(f"Sampler has {sampler.n_arms} arms, schedule has {schedule.n_arms}")
    table, segments = schedule.as_arrays(steps)
    rngs = spawn_generators(seed, _STREAMS)
    sampler.reset()

    n = len(table)
    arms = np.empty(n, dtype=int)
    rewards = np.empty(n)
    best = table.max(axis=1)
    for t in range(n):
        arm = sampler.select(rngs["sampler"])
        reward = 1.0 if rngs["reward"].random() < table[t, arm] else 0.0
        sampler.update(arm, reward, rngs["sampler"])
        arms[t] = arm
        rewards[t] = reward
    regret = best - table[np.arange(n), arms]
    return RegretTrace(arms, rewards, regret, segments, sampler.kind,
                       seed if isinstance(seed, int) else None)


# ---------------------------------------------------------------------------
# Monte-Carlo batches
# ---------------------------------------------------------------------------

def _run_cell(args: Tuple[str, RewardSchedule, Optional[int], Any, Optional[DtsConfig], float, int]) -> RegretTrace:
    kind, schedule, steps, seq, config, epsilon, index = args
    sampler = make_sampler(kind, schedule.n_arms, config, epsilon)
    trace = run_switching(sampler, schedule, steps, seq)
    trace.seed = index
    return trace


def run_many(kind: str,
             schedule: RewardSchedule,
             n_seeds: int,
             master_seed: int = 0,
             steps: Optional[int] = None,
             config: Optional[DtsConfig] = None,
             epsilon: float = 0.1,
             workers: int = 1) -> List[RegretTrace]:
    """
    Independent runs seeded ``seed_sequence(master_seed, i)``.

    Run ``i`` does not depend on ``n_seeds``, so growing a batch keeps the
    existing runs.
    """
    require_int("n_seeds", n_seeds)
    cells = [(kind, schedule, steps, seed_sequence(master_seed, i), config, epsilon, i)
             for i in range(n_seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_run_cell, cells))
    else:
        traces = [_run_cell(cell) for cell in cells]
    logger.info(f"{kind}: {n_seeds} runs, mean regret "
                f"{np.mean([t.total_regret for t in traces]):.2f}")
    return traces


def mean_cumulative_regret(traces: Sequence[RegretTrace]) -> np.ndarray:
    return np.mean([t.cumulative for t in traces], axis=0)


def regret_growth_ratio(traces: Sequence[RegretTrace], horizon: int) -> float:
    """R(2T) / R(T) of the seed-averaged cumulative regret."""
    curve = mean_cumulative_regret(traces)
    if 2 * horizon > curve.size:
        raise ValueError(f"Traces hold {curve.size} steps, {2 * horizon} needed")
    base = curve[horizon - 1]
    if base == 0.0:
        return 0.0
    return float(curve[2 * horizon - 1] / base)


__all__ = [
    "CANONICAL_STEPS_PER_LEVEL",
    "load_calibration_fixture",
    "RewardSchedule",
    "RegretTrace",
    "run_switching",
    "run_many",
    "mean_cumulative_regret",
    "regret_growth_ratio",
]
