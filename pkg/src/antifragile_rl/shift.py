"""
Value-distribution shift under observation attacks.

Each model's critic values over a shared probe set form an empirical
distribution; the 1-Wasserstein distance between the clean and the
attacked distribution measures how far an attack moves the model. The
shift vector over the ensemble is mapped to Bernoulli success
probabilities for the policy switcher.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .attacks import AttackConfig, ObservationAttacker
from .environment import UavDeconflictionEnv
from .robust_rl.agents import RobustPolicyPair

logger = logging.getLogger(__name__)

DEFAULT_K_MULT = 0.9
ZERO_SHIFT_FLOOR = 1e-9
REFERENCES = ("own", "vanilla")


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ValueSample:
    """Critic values over a probe set, sorted ascending."""

    values: np.ndarray

    def __post_init__(self):
        values = np.sort(np.asarray(self.values, dtype=float).reshape(-1))
        if values.size == 0:
            raise ValueError("ValueSample must not be empty")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


def _sorted_values(sample: Union[ValueSample, Sequence[float], np.ndarray]) -> np.ndarray:
    if isinstance(sample, ValueSample):
        return sample.values
    values = np.sort(np.asarray(sample, dtype=float).reshape(-1))
    if values.size == 0:
        raise ValueError("Samples must not be empty")
    return values


def _quantiles(levels: np.ndarray, cumulative: np.ndarray, values: np.ndarray) -> np.ndarray:
    index = np.searchsorted(cumulative, levels, side="left")
    return values[np.clip(index, 0, values.size - 1)]


def wasserstein1(a: Union[ValueSample, Sequence[float]],
                 b: Union[ValueSample, Sequence[float]]) -> float:
    """
    Exact 1-Wasserstein distance between two empirical distributions.

    Integrates |F_a⁻¹(q) - F_b⁻¹(q)| over the merged quantile breakpoints,
    which for equal sizes is the sorted pairing (1/n)Σ|a_(i) - b_(i)|.
    """
    u = _sorted_values(a)
    v = _sorted_values(b)
    if u.size == v.size:
        return float(np.mean(np.abs(u - v)))
    u_cum = np.arange(1, u.size + 1) / u.size
    v_cum = np.arange(1, v.size + 1) / v.size
    levels = np.sort(np.concatenate([u_cum, v_cum]))
    widths = np.diff(np.concatenate([[0.0], levels]))
    gaps = np.abs(_quantiles(levels, u_cum, u) - _quantiles(levels, v_cum, v))
    return float(np.sum(widths * gaps))


def value_distribution(pair: RobustPolicyPair,
                       probe_states: np.ndarray,
                       adversarial_states: Optional[np.ndarray] = None) -> ValueSample:
    """
    Z = Q(Φ, α·ν(Φ) + (1-α)·μ(Φ)) over the probe set.

    With ``adversarial_states`` both heads and the critic see Φ_adv instead.
    For the vanilla pair (α = 0) this is Q(Φ, μ(Φ)).
    """
    states = np.atleast_2d(np.asarray(probe_states, dtype=float))
    if states.shape[0] == 0:
        raise ValueError("Probe set must not be empty")
    if adversarial_states is not None:
        states = np.atleast_2d(np.asarray(adversarial_states, dtype=float))
    return ValueSample(pair.value(states))


def attack_config_for(target: RobustPolicyPair, cfg: AttackConfig) -> AttackConfig:
    """Attach ``target``'s observation statistics unless ``cfg`` already has some."""
    if cfg.obs_mean is not None or target.obs_stats.count < 2:
        return cfg
    return cfg.with_stats(target.obs_stats.mean, target.obs_stats.std)


def craft_adversarial_states(target: RobustPolicyPair,
                             probe_states: np.ndarray,
                             cfg: AttackConfig,
                             rng: np.random.Generator) -> np.ndarray:
    """Attack every probe state against ``target``'s actor loss."""
    attacker = ObservationAttacker(attack_config_for(target, cfg), target.attack_loss_gradient)
    return attacker.perturb(np.atleast_2d(np.asarray(probe_states, dtype=float)), rng)


# ---------------------------------------------------------------------------
# Shift reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShiftReport:
    """Shifts [d⁰, d^α₁, ...] at one attack strength and their Bernoulli parameters."""

    epsilon: float
    d: List[float]
    p_true: List[float] = field(default_factory=list)
    k_mult: float = DEFAULT_K_MULT
    alphas: List[float] = field(default_factory=list)
    reference: str = "own"
    attack: str = "fw"

    @property
    def d_min(self) -> float:
        return float(min(self.d))

    @property
    def best(self) -> int:
        return int(np.argmin(self.d))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon, "d": list(self.d), "d_min": self.d_min,
            "p_true": list(self.p_true), "k_mult": self.k_mult, "alphas": list(self.alphas),
            "reference": self.reference, "attack": self.attack,
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "ShiftReport":
        return cls(
            epsilon=float(raw["epsilon"]),
            d=[float(v) for v in raw["d"]],
            p_true=[float(v) for v in raw.get("p_true", [])],
            k_mult=float(raw.get("k_mult", DEFAULT_K_MULT)),
            alphas=[float(v) for v in raw.get("alphas", [])],
            reference=str(raw.get("reference", "own")),
            attack=str(raw.get("attack", "fw")),
        )

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ShiftReport":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def bernoulli_params(d: Sequence[float],
                     k_mult: float = DEFAULT_K_MULT,
                     tau: float = ZERO_SHIFT_FLOOR) -> List[float]:
    """
    p_k = k_mult · d_min / d_k.

    A zero-shift model gets k_mult and the others k_mult·min(1, τ/d_k); an
    all-zero vector gives k_mult everywhere.
    """
    shifts = np.asarray(d, dtype=float)
    if shifts.size == 0:
        raise ValueError("Shift vector must not be empty")
    if np.any(shifts < 0) or not np.all(np.isfinite(shifts)):
        raise ValueError("Shifts must be finite and non-negative")
    if not 0.0 < k_mult <= 1.0:
        raise ValueError(f"k_mult must lie in (0, 1], got {k_mult}")
    d_min = float(shifts.min())
    if np.all(shifts == 0.0):
        return [k_mult] * shifts.size
    if d_min == 0.0:
        ratios = np.where(shifts == 0.0, 1.0, np.minimum(1.0, tau / np.where(shifts == 0.0, 1.0, shifts)))
    else:
        ratios = d_min / shifts
    return [float(k_mult * r) for r in ratios]


def proxy_reward(d: Sequence[float]) -> List[float]:
    """r_k = d_min / d_k (Bernoulli parameters with k_mult = 1)."""
    return bernoulli_params(d, 1.0)


def shift_vector(members: Sequence[RobustPolicyPair],
                 vanilla: RobustPolicyPair,
                 probe_states: np.ndarray,
                 epsilon: float,
                 cfg: Optional[AttackConfig] = None,
                 rng: Optional[np.random.Generator] = None,
                 reference: str = "own",
                 k_mult: float = DEFAULT_K_MULT,
                 adversarial_states: Optional[np.ndarray] = None) -> ShiftReport:
    """
    Shift of the vanilla model and every robust member at one attack strength.

    Adversarial states are crafted once against the vanilla policy and
    shared by every model.

    The default ``reference="own"`` compares each model's attacked values
    with its own clean values, so a member whose clean values already differ
    from the vanilla ones is charged only for what the attack moves.
    ``reference="vanilla"`` compares every model's attacked values with the
    vanilla clean values instead, which folds that clean gap into the shift.
    """
    if reference not in REFERENCES:
        raise ValueError(f"reference must be one of {REFERENCES}")
    cfg = (cfg or AttackConfig()).with_epsilon(epsilon)
    states = np.atleast_2d(np.asarray(probe_states, dtype=float))
    if adversarial_states is None:
        adversarial_states = craft_adversarial_states(
            vanilla, states, cfg, rng if rng is not None else np.random.default_rng())

    vanilla_clean = value_distribution(vanilla, states)
    shifts = []
    for model in [vanilla, *members]:
        attacked = value_distribution(model, states, adversarial_states)
        clean = value_distribution(model, states) if reference == "own" else vanilla_clean
        shifts.append(wasserstein1(clean, attacked))

    alphas = [vanilla.alpha] + [m.alpha for m in members]
    logger.debug(f"Shift at epsilon={epsilon}: {np.round(shifts, 4).tolist()}")
    return ShiftReport(float(epsilon), shifts, bernoulli_params(shifts, k_mult), k_mult,
                       alphas, reference, cfg.kind)


# ---------------------------------------------------------------------------
# Probe sets
# ---------------------------------------------------------------------------

def harvest_probe_states(policy: RobustPolicyPair,
                         env: UavDeconflictionEnv,
                         n_states: int,
                         max_episodes: int = 1000) -> np.ndarray:
    """
    Observations visited by clean rollouts of ``policy``'s agent head.

    The environment's own generator fixes the start positions, so seeding
    ``env`` fixes the probe set.
    """
    if n_states <= 0:
        raise ValueError(f"n_states must be positive, got {n_states}")
    states: List[np.ndarray] = []
    for _ in range(max_episodes):
        obs = env.reset().as_array()
        while len(states) < n_states:
            states.append(obs)
            outcome = env.step(policy.act(obs))
            if outcome.done:
                break
            obs = outcome.next_obs.as_array()
        if len(states) >= n_states:
            break
    if len(states) < n_states:
        raise RuntimeError(f"Collected only {len(states)} of {n_states} probe states")
    return np.vstack(states)


__all__ = [
    "DEFAULT_K_MULT",
    "REFERENCES",
    "ZERO_SHIFT_FLOOR",
    "ValueSample",
    "ShiftReport",
    "wasserstein1",
    "value_distribution",
    "attack_config_for",
    "craft_adversarial_states",
    "bernoulli_params",
    "proxy_reward",
    "shift_vector",
    "harvest_probe_states",
]
