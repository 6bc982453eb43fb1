"""
Adversarial observation generators.

Gradient attacks (Frank-Wolfe, PGD, FGSM) work in the normalized
observation space given by ``AttackConfig.obs_mean`` / ``obs_std`` and
return raw observations. The gradient function maps raw observations to
∇_Φ of the loss being maximized (the actor loss -Q(Φ, μ(Φ)) for trained
policies); since the standard deviations are positive, its sign equals the
sign of the normalized-space gradient. The spoofing attack biases the
UAV's own position instead.
"""

import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .environment import AgentObs
from .utils.helpers import optional_array, signum
from .utils.validation import require_int, require_non_negative, require_positive

logger = logging.getLogger(__name__)

GradientFn = Callable[[np.ndarray], np.ndarray]

ATTACK_KINDS = ("fw", "pgd", "fgsm", "spoof", "none")


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "fw"
    epsilon: float = 0.0
    n_steps: int = 50
    fw_c: float = 2.0
    obs_mean: Optional[Tuple[float, ...]] = None
    obs_std: Optional[Tuple[float, ...]] = None
    random_start: bool = True
    spoof_low: float = 0.04
    spoof_high: float = 0.06

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"Unknown attack kind {self.kind!r}; expected one of {ATTACK_KINDS}")
        require_non_negative("epsilon", self.epsilon)
        require_int("n_steps", self.n_steps)
        require_positive("fw_c", self.fw_c)
        if (self.obs_mean is None) != (self.obs_std is None):
            raise ValueError("obs_mean and obs_std must be given together")
        if self.obs_std is not None:
            std = np.asarray(self.obs_std, dtype=float)
            if np.any(std <= 0.0):
                raise ValueError("obs_std must be positive componentwise")
            object.__setattr__(self, "obs_std", tuple(float(s) for s in std))
            object.__setattr__(self, "obs_mean", tuple(float(m) for m in self.obs_mean))
        if not self.spoof_low <= self.spoof_high:
            raise ValueError("spoof_low must not exceed spoof_high")

    @property
    def mean(self) -> Optional[np.ndarray]:
        return optional_array(self.obs_mean)

    @property
    def std(self) -> Optional[np.ndarray]:
        return optional_array(self.obs_std)

    def with_epsilon(self, epsilon: float) -> "AttackConfig":
        return replace(self, epsilon=epsilon)

    def with_stats(self, mean: Sequence[float], std: Sequence[float]) -> "AttackConfig":
        return replace(self, obs_mean=tuple(np.asarray(mean, dtype=float)),
                       obs_std=tuple(np.asarray(std, dtype=float)))

    def normalize(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        if self.obs_mean is None:
            return obs.copy()
        return (obs - self.mean) / self.std

    def denormalize(self, obs_norm: np.ndarray) -> np.ndarray:
        obs_norm = np.asarray(obs_norm, dtype=float)
        if self.obs_mean is None:
            return obs_norm.copy()
        return obs_norm * self.std + self.mean

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind, "epsilon": self.epsilon, "n_steps": self.n_steps,
            "fw_c": self.fw_c, "random_start": self.random_start,
            "spoof_low": self.spoof_low, "spoof_high": self.spoof_high,
        }


def _scale(cfg: Optional[AttackConfig], obs: np.ndarray) -> np.ndarray:
    if cfg is None or cfg.obs_std is None:
        return np.ones_like(obs)
    return np.broadcast_to(cfg.std, obs.shape)


# ---------------------------------------------------------------------------
# Gradient attacks
# ---------------------------------------------------------------------------

def fgsm(obs: np.ndarray,
         gradient_fn: GradientFn,
         epsilon: float,
         cfg: Optional[AttackConfig] = None) -> np.ndarray:
    """
    One signed gradient step Φ + ε·sign(g) in normalized space.

    Without ``cfg`` the step is taken in raw observation space.
    """
    obs = np.asarray(obs, dtype=float)
    require_non_negative("epsilon", epsilon)
    if epsilon == 0.0:
        return obs.copy()
    step = epsilon * signum(gradient_fn(obs))
    return obs + _scale(cfg, obs) * step


def pgd_attack(obs: np.ndarray,
               gradient_fn: GradientFn,
               cfg: AttackConfig,
               rng: np.random.Generator) -> np.ndarray:
    """
    Projected signed-gradient ascent in the ℓ∞ ball of radius ε.

    N steps of size ε/N from a uniform random start in the ball (or from
    zero when ``random_start`` is off).
    """
    obs = np.asarray(obs, dtype=float)
    eps = cfg.epsilon
    if eps == 0.0:
        return obs.copy()
    scale = _scale(cfg, obs)
    if cfg.random_start:
        delta = rng.uniform(-eps, eps, size=obs.shape)
    else:
        delta = np.zeros_like(obs)
    step = eps / cfg.n_steps
    for _ in range(cfg.n_steps):
        grad = gradient_fn(obs + scale * delta)
        delta = np.clip(delta + step * signum(grad), -eps, eps)
    return obs + scale * delta


def fw_attack(obs: np.ndarray,
              gradient_fn: GradientFn,
              cfg: AttackConfig,
              rng: np.random.Generator,
              return_trace: bool = False):
    """
    Frank-Wolfe attack over the ℓ∞ ball.

    δ₀ = 2ε·U(-0.5, 0.5); for k = 0..N-1 the linear oracle gives
    s_k = ε·sign(g_k) and δ_{k+1} = ϝ_k s_k + (1-ϝ_k)δ_k with ϝ_k = c/(k+c).
    With ``return_trace`` the list of iterates δ_0..δ_N is returned too.
    """
    obs = np.asarray(obs, dtype=float)
    eps = cfg.epsilon
    if eps == 0.0:
        return (obs.copy(), [np.zeros_like(obs)]) if return_trace else obs.copy()
    scale = _scale(cfg, obs)
    delta = 2.0 * eps * rng.uniform(-0.5, 0.5, size=obs.shape)
    trace = [delta.copy()]
    for k in range(cfg.n_steps):
        step_size = cfg.fw_c / (k + cfg.fw_c)
        grad = gradient_fn(obs + scale * delta)
        vertex = eps * signum(grad)
        delta = np.clip(step_size * vertex + (1.0 - step_size) * delta, -eps, eps)
        trace.append(delta.copy())
    adversarial = obs + scale * delta
    return (adversarial, trace) if return_trace else adversarial


# ---------------------------------------------------------------------------
# Position spoofing
# ---------------------------------------------------------------------------

def spoof_bias(rng: np.random.Generator, low: float = 0.04, high: float = 0.06,
               rows: Tuple[int, ...] = ()) -> np.ndarray:
    return rng.uniform(low, high, size=rows + (3,))


def spoof_position(true_position: Sequence[float],
                   rng: np.random.Generator,
                   low: float = 0.04,
                   high: float = 0.06) -> np.ndarray:
    """Position with an independent Uniform(low, high) bias on each component."""
    return np.asarray(true_position, dtype=float) + spoof_bias(rng, low, high)


def spoof_observation(obs: np.ndarray,
                      rng: np.random.Generator,
                      low: float = 0.04,
                      high: float = 0.06) -> np.ndarray:
    """
    Observation built from a spoofed position.

    The bias b moves the believed position, so both relative offsets shift
    by -b; the obstacle velocity is unaffected.
    """
    obs = np.asarray(obs, dtype=float).copy()
    bias = spoof_bias(rng, low, high, obs.shape[:-1])
    obs[..., 0:3] -= bias
    obs[..., 3:6] -= bias
    return obs


# ---------------------------------------------------------------------------
# Dispatcher
# ---------------------------------------------------------------------------

class ObservationAttacker:
    """
    Applies the configured attack to each observation a policy receives.

    Gradient attacks need ``gradient_fn`` (usually the attacked policy's
    ``attack_loss_gradient``).
    """

    def __init__(self, cfg: AttackConfig, gradient_fn: Optional[GradientFn] = None):
        if cfg.kind in ("fw", "pgd", "fgsm") and cfg.epsilon > 0 and gradient_fn is None:
            raise ValueError(f"Attack {cfg.kind!r} needs a gradient function")
        self.cfg = cfg
        self.gradient_fn = gradient_fn

    @property
    def active(self) -> bool:
        if self.cfg.kind == "none":
            return False
        return self.cfg.kind == "spoof" or self.cfg.epsilon > 0

    def perturb(self, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        kind = self.cfg.kind
        if not self.active:
            return np.asarray(obs, dtype=float).copy()
        if kind == "spoof":
            return spoof_observation(obs, rng, self.cfg.spoof_low, self.cfg.spoof_high)
        if kind == "fgsm":
            return fgsm(obs, self.gradient_fn, self.cfg.epsilon, self.cfg)
        if kind == "pgd":
            return pgd_attack(obs, self.gradient_fn, self.cfg, rng)
        return fw_attack(obs, self.gradient_fn, self.cfg, rng)

    def perturb_obs(self, obs: AgentObs, rng: np.random.Generator) -> AgentObs:
        return AgentObs.from_array(self.perturb(obs.as_array(), rng))


def attack_observation(obs: np.ndarray,
                       cfg: AttackConfig,
                       gradient_fn: Optional[GradientFn],
                       rng: np.random.Generator) -> np.ndarray:
    """Convenience wrapper around :class:`ObservationAttacker`."""
    return ObservationAttacker(cfg, gradient_fn).perturb(obs, rng)


__all__ = [
    "ATTACK_KINDS",
    "AttackConfig",
    "GradientFn",
    "fgsm",
    "pgd_attack",
    "fw_attack",
    "spoof_bias",
    "spoof_position",
    "spoof_observation",
    "ObservationAttacker",
    "attack_observation",
]
