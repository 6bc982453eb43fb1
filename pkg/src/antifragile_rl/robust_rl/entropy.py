"""
Entropy gap between exploration and exploitation episode returns.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import entropy as shannon_entropy

from ..utils.helpers import chunked

DEFAULT_BINS = 16


@dataclass(frozen=True)
class EntropyGapReport:
    """ΔH = mean(H_rand) - max(H_opt), entropies in bits."""

    h_rand: float
    h_opt: float
    delta_h: float
    bins: int = DEFAULT_BINS
    h_rand_windows: Tuple[float, ...] = field(default_factory=tuple)
    h_opt_windows: Tuple[float, ...] = field(default_factory=tuple)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "h_rand": self.h_rand,
            "h_opt": self.h_opt,
            "delta_h": self.delta_h,
            "bins": self.bins,
            "h_rand_windows": list(self.h_rand_windows),
            "h_opt_windows": list(self.h_opt_windows),
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "EntropyGapReport":
        return cls(
            h_rand=float(raw["h_rand"]),
            h_opt=float(raw["h_opt"]),
            delta_h=float(raw["delta_h"]),
            bins=int(raw.get("bins", DEFAULT_BINS)),
            h_rand_windows=tuple(raw.get("h_rand_windows", ())),
            h_opt_windows=tuple(raw.get("h_opt_windows", ())),
        )


def reward_entropy(values: Sequence[float], bins: int = DEFAULT_BINS) -> float:
    """
    Shannon entropy (bits) of a histogram of episode returns.

    The histogram spans the window's own range; a constant window has
    entropy 0.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("Cannot compute the entropy of an empty window")
    if bins < 1:
        raise ValueError(f"bins must be positive, got {bins}")
    if np.all(values == values[0]):
        return 0.0
    counts, _ = np.histogram(values, bins=bins)
    return float(shannon_entropy(counts, base=2))


def entropy_gap(explore_rewards: Sequence[float],
                exploit_rewards: Sequence[float],
                bins: int = DEFAULT_BINS,
                window: Optional[int] = None) -> EntropyGapReport:
    """
    Entropy gap between the exploration and exploitation phases.

    Both histories are cut into consecutive windows of ``window`` episodes
    (default: the length of the exploration history); H_rand is averaged
    over exploration windows and H_opt is the maximum over exploitation
    windows.
    """
    explore = list(explore_rewards)
    exploit = list(exploit_rewards)
    if not explore or not exploit:
        raise ValueError("Both reward histories must be non-empty")
    window = window or len(explore)

    h_rand = tuple(reward_entropy(w, bins) for w in chunked(explore, window))
    h_opt = tuple(reward_entropy(w, bins) for w in chunked(exploit, window))
    mean_rand = float(np.mean(h_rand))
    max_opt = float(np.max(h_opt))
    return EntropyGapReport(mean_rand, max_opt, mean_rand - max_opt, bins, h_rand, h_opt)


__all__ = ["EntropyGapReport", "reward_entropy", "entropy_gap", "DEFAULT_BINS"]
