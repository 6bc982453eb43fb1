"""
Policy samplers for switching between ensemble members.

Discounted Thompson Sampling keeps a Beta posterior per arm whose success
and failure counts decay geometrically every step, so the posterior can
follow a moving success probability. Undiscounted Thompson Sampling,
ε-greedy and UCB1 share the same interface for ablations.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.validation import require_int, require_non_negative, require_probability

logger = logging.getLogger(__name__)

SAMPLER_KINDS = ("dts", "ts", "eps", "ucb")

# lower bound on Beta shape parameters handed to the generator
BETA_FLOOR = 1e-12


@dataclass
class BetaArm:
    """Discounted sufficient statistics of one arm with a Beta(a0, b0) prior."""

    s: float = 0.0
    f: float = 0.0
    a0: float = 1.0
    b0: float = 1.0

    def __post_init__(self):
        require_non_negative("s", self.s)
        require_non_negative("f", self.f)
        require_non_negative("a0", self.a0)
        require_non_negative("b0", self.b0)

    @property
    def a(self) -> float:
        return self.s + self.a0

    @property
    def b(self) -> float:
        return self.f + self.b0


@dataclass(frozen=True)
class DtsConfig:
    discount: float = 0.8
    n_arms: int = 2
    a0: float = 1.0
    b0: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.discount <= 1.0:
            raise ValueError(f"discount must lie in (0, 1], got {self.discount}")
        require_int("n_arms", self.n_arms)
        require_non_negative("a0", self.a0)
        require_non_negative("b0", self.b0)

    def make_arms(self) -> List[BetaArm]:
        return [BetaArm(0.0, 0.0, self.a0, self.b0) for _ in range(self.n_arms)]


def posterior_stats(arm: BetaArm) -> Tuple[float, float]:
    """Mean and variance of Beta(S + a0, F + b0)."""
    a, b = arm.a, arm.b
    total = a + b
    if total <= 0.0:
        raise ValueError("Posterior is undefined when S + F + a0 + b0 = 0")
    mean = a / total
    variance = a * b / (total * total * (total + 1.0))
    return mean, variance


def dts_select(arms: Sequence[BetaArm], rng: np.random.Generator) -> int:
    """
    Draw Λ_k ~ Beta(S_k + a0, F_k + b0) for every arm and play the argmax.

    Ties go to the lowest index.
    """
    if not arms:
        raise ValueError("At least one arm is required")
    a = np.maximum([arm.a for arm in arms], BETA_FLOOR)
    b = np.maximum([arm.b for arm in arms], BETA_FLOOR)
    samples = rng.beta(a, b)
    return int(np.argmax(samples))


def dts_update(arms: List[BetaArm],
               chosen: int,
               r_tilde: float,
               discount: float,
               rng: np.random.Generator) -> List[BetaArm]:
    """
    Bernoulli(r̃) trial, then discount every arm and credit the chosen one.

    Chosen arm: S ← 𝔶S + r̆, F ← 𝔶F + (1 - r̆); all others: S ← 𝔶S, F ← 𝔶F.
    The arms are updated in place and returned.
    """
    if not 0 <= chosen < len(arms):
        raise ValueError(f"Arm index {chosen} out of range for {len(arms)} arms")
    require_probability("r_tilde", r_tilde)
    if not 0.0 < discount <= 1.0:
        raise ValueError(f"discount must lie in (0, 1], got {discount}")
    success = 1.0 if rng.random() < r_tilde else 0.0
    for arm in arms:
        arm.s *= discount
        arm.f *= discount
    arms[chosen].s += success
    arms[chosen].f += 1.0 - success
    return arms


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

class Sampler:
    """
    Common interface: ``select(rng)``, ``update(arm, r_tilde, rng)``, ``reset()``.

    ``r_tilde`` is a success probability or an observed binary reward in [0, 1].
    """

    kind = "base"

    def __init__(self, n_arms: int):
        self.n_arms = require_int("n_arms", n_arms)
        self.t = 0

    def select(self, rng: np.random.Generator) -> int:
        raise NotImplementedError

    def update(self, arm: int, r_tilde: float, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def reset(self) -> None:
        self.t = 0

    def _check_arm(self, arm: int) -> None:
        if not 0 <= arm < self.n_arms:
            raise ValueError(f"Arm index {arm} out of range for {self.n_arms} arms")

    def state(self) -> Dict[str, Any]:
        return {"kind": self.kind, "n_arms": self.n_arms, "t": self.t}


class DiscountedThompsonSampler(Sampler):
    """Thompson Sampling with geometrically discounted Beta posteriors."""

    kind = "dts"

    def __init__(self, n_arms: int, discount: float = 0.8, a0: float = 1.0, b0: float = 1.0):
        super().__init__(n_arms)
        self.config = DtsConfig(discount, n_arms, a0, b0)
        self.arms = self.config.make_arms()

    @property
    def discount(self) -> float:
        return self.config.discount

    def select(self, rng: np.random.Generator) -> int:
        return dts_select(self.arms, rng)

    def update(self, arm: int, r_tilde: float, rng: np.random.Generator) -> None:
        self._check_arm(arm)
        dts_update(self.arms, arm, r_tilde, self.discount, rng)
        self.t += 1

    def reset(self) -> None:
        super().reset()
        self.arms = self.config.make_arms()

    def posterior_means(self) -> np.ndarray:
        return np.array([posterior_stats(arm)[0] for arm in self.arms])

    def state(self) -> Dict[str, Any]:
        out = super().state()
        out.update(discount=self.discount, s=[a.s for a in self.arms], f=[a.f for a in self.arms])
        return out


class ThompsonSampler(DiscountedThompsonSampler):
    """Undiscounted Thompson Sampling (𝔶 = 1)."""

    kind = "ts"

    def __init__(self, n_arms: int, a0: float = 1.0, b0: float = 1.0):
        super().__init__(n_arms, 1.0, a0, b0)


class _EmpiricalMeanSampler(Sampler):

    def __init__(self, n_arms: int):
        super().__init__(n_arms)
        self.counts = np.zeros(n_arms, dtype=int)
        self.means = np.zeros(n_arms)

    def update(self, arm: int, r_tilde: float, rng: np.random.Generator) -> None:
        self._check_arm(arm)
        require_probability("r_tilde", r_tilde)
        self.counts[arm] += 1
        self.means[arm] += (r_tilde - self.means[arm]) / self.counts[arm]
        self.t += 1

    def reset(self) -> None:
        super().reset()
        self.counts[:] = 0
        self.means[:] = 0.0

    def state(self) -> Dict[str, Any]:
        out = super().state()
        out.update(counts=self.counts.tolist(), means=self.means.tolist())
        return out


class EpsilonGreedySampler(_EmpiricalMeanSampler):
    """Uniform exploration with probability ε, otherwise the best empirical mean."""

    kind = "eps"

    def __init__(self, n_arms: int, epsilon: float = 0.1):
        super().__init__(n_arms)
        self.epsilon = require_probability("epsilon", epsilon)

    def select(self, rng: np.random.Generator) -> int:
        if self.epsilon > 0.0 and rng.random() < self.epsilon:
            return int(rng.integers(self.n_arms))
        return int(np.argmax(self.means))


class UcbSampler(_EmpiricalMeanSampler):
    """UCB1: each arm once in index order, then argmax mean + √(2 ln t / n_k)."""

    kind = "ucb"

    def select(self, rng: np.random.Generator) -> int:
        unplayed = np.flatnonzero(self.counts == 0)
        if unplayed.size:
            return int(unplayed[0])
        bonus = np.sqrt(2.0 * math.log(self.counts.sum()) / self.counts)
        return int(np.argmax(self.means + bonus))


def make_sampler(kind: str,
                 n_arms: int,
                 config: Optional[DtsConfig] = None,
                 epsilon: float = 0.1) -> Sampler:
    """
    Build a sampler by name.

    Args:
        kind: One of ``SAMPLER_KINDS``
        n_arms: Number of policies to switch between
        config: Discount and priors for the Thompson samplers
        epsilon: Exploration rate for ``eps``

    Returns:
        Fresh sampler
    """
    config = config or DtsConfig(n_arms=n_arms)
    if kind == "dts":
        return DiscountedThompsonSampler(n_arms, config.discount, config.a0, config.b0)
    if kind == "ts":
        return ThompsonSampler(n_arms, config.a0, config.b0)
    if kind == "eps":
        return EpsilonGreedySampler(n_arms, epsilon)
    if kind == "ucb":
        return UcbSampler(n_arms)
    raise ValueError(f"Unknown sampler {kind!r}; expected one of {SAMPLER_KINDS}")


__all__ = [
    "SAMPLER_KINDS",
    "BetaArm",
    "DtsConfig",
    "posterior_stats",
    "dts_select",
    "dts_update",
    "Sampler",
    "DiscountedThompsonSampler",
    "ThompsonSampler",
    "EpsilonGreedySampler",
    "UcbSampler",
    "make_sampler",
]
