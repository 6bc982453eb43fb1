"""
Agent/adversary policy pairs with a joint critic.

The actor-critic math shared by every trainer lives here as module
functions over a :class:`RobustPolicyPair`: action composition, critic
targets, the squared-error critic loss and the scaled policy gradients.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..neural import Mlp, Params, RunningMeanStd, load_networks, save_networks
from ..utils.validation import require_probability
from .replay import Batch

logger = logging.getLogger(__name__)

MIXTURES = ("mixed", "expected")

_NETWORKS = ("agent", "adversary", "critic", "agent_target", "adversary_target", "critic_target")


class RobustPolicyPair:
    """
    Agent policy μ_θ, adversary policy ν_ω and joint critic Q_φ, plus targets.

    ``alpha`` is the adversary's share of the executed action and is fixed
    for the lifetime of the pair. The deployed policy is the agent head.
    """

    def __init__(self,
                 obs_dim: int,
                 action_dim: int,
                 low: Sequence[float],
                 high: Sequence[float],
                 alpha: float = 0.0,
                 rng: Optional[np.random.Generator] = None,
                 hidden: int = 128,
                 kind: str = "action_robust"):
        self.alpha = require_probability("alpha", alpha)
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.low = np.asarray(low, dtype=float)
        self.high = np.asarray(high, dtype=float)
        self.kind = kind
        rng = rng if rng is not None else np.random.default_rng()

        self.agent = Mlp.policy(obs_dim, action_dim, self.low, self.high, hidden, rng)
        self.adversary = Mlp.policy(obs_dim, action_dim, self.low, self.high, hidden, rng)
        self.critic = Mlp.critic(obs_dim, action_dim, hidden, rng)
        self.agent_target = self.agent.copy()
        self.adversary_target = self.adversary.copy()
        self.critic_target = self.critic.copy()
        self.obs_stats = RunningMeanStd(obs_dim)

    # -----------------------------
    # Inference
    # -----------------------------

    def act(self, obs: np.ndarray) -> np.ndarray:
        """Deployed action μ_θ(Φ)."""
        return self.agent.forward(obs)

    def adversary_act(self, obs: np.ndarray) -> np.ndarray:
        return self.adversary.forward(obs)

    def q_value(self, obs: np.ndarray, action: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        action = np.asarray(action, dtype=float)
        out = self.critic.forward(np.concatenate([obs, action], axis=-1))
        return out[..., 0]

    def value(self, obs: np.ndarray) -> np.ndarray:
        """Q_φ(Φ, αν_ω(Φ) + (1-α)μ_θ(Φ)) for one observation or a batch."""
        action = compose_action(self.agent.forward(obs), self.adversary.forward(obs), self.alpha)
        return self.q_value(obs, action)

    def attack_loss_gradient(self, obs: np.ndarray) -> np.ndarray:
        """
        ∇_Φ of the actor loss -Q_φ(Φ, μ_θ(Φ)).

        The observation enters the critic directly and through the policy.
        """
        obs = np.asarray(obs, dtype=float)
        single = obs.ndim == 1
        batch = obs.reshape(1, -1) if single else obs
        action, policy_cache = self.agent.forward_with_cache(batch)
        _, critic_cache = self.critic.forward_with_cache(np.concatenate([batch, action], axis=1))
        _, grad_input = self.critic.backward(critic_cache, -np.ones((len(batch), 1)))
        grad_obs = grad_input[:, :self.obs_dim]
        _, through_policy = self.agent.backward(policy_cache, grad_input[:, self.obs_dim:])
        grad = grad_obs + through_policy
        return grad[0] if single else grad

    def networks(self) -> Dict[str, Mlp]:
        return {name: getattr(self, name) for name in _NETWORKS}

    def is_finite(self) -> bool:
        return all(net.is_finite() for net in self.networks().values())

    # -----------------------------
    # Persistence
    # -----------------------------

    def save(self, path: Union[str, Path], metadata: Optional[Mapping[str, Any]] = None) -> Path:
        meta = {"alpha": self.alpha, "kind": self.kind, "obs_dim": self.obs_dim,
                "action_dim": self.action_dim}
        meta.update(metadata or {})
        extra = {
            "low": self.low, "high": self.high,
            "obs_mean": self.obs_stats.mean, "obs_m2": self.obs_stats.m2,
            "obs_count": np.asarray(self.obs_stats.count),
        }
        return save_networks(path, self.networks(), meta, extra)

    @classmethod
    def load(cls, path: Union[str, Path]) -> Tuple["RobustPolicyPair", Dict[str, Any]]:
        networks, metadata, extra = load_networks(path)
        pair = cls.__new__(cls)
        pair.alpha = float(metadata["alpha"])
        pair.kind = str(metadata.get("kind", "action_robust"))
        pair.obs_dim = int(metadata["obs_dim"])
        pair.action_dim = int(metadata["action_dim"])
        pair.low = np.array(extra["low"])
        pair.high = np.array(extra["high"])
        for name in _NETWORKS:
            setattr(pair, name, networks[name])
        pair.obs_stats = RunningMeanStd(pair.obs_dim)
        pair.obs_stats.mean = np.array(extra["obs_mean"])
        pair.obs_stats.m2 = np.array(extra["obs_m2"])
        pair.obs_stats.count = int(extra["obs_count"])
        return pair, metadata


# ---------------------------------------------------------------------------
# Actor-critic math
# ---------------------------------------------------------------------------

def compose_action(agent_action: np.ndarray,
                   adversary_action: np.ndarray,
                   alpha: float,
                   low: Optional[np.ndarray] = None,
                   high: Optional[np.ndarray] = None) -> np.ndarray:
    """α·adversary + (1-α)·agent, clipped to [low, high] when bounds are given."""
    action = alpha * np.asarray(adversary_action, dtype=float) \
        + (1.0 - alpha) * np.asarray(agent_action, dtype=float)
    if low is not None and high is not None:
        action = np.clip(action, low, high)
    return action


def exploration_noise(rng: np.random.Generator,
                      noise: Tuple[float, float],
                      size: int) -> np.ndarray:
    """Gaussian exploration noise with (mean, std)."""
    mean, std = noise
    return rng.normal(mean, std, size=size)


def mixed_action(pair: RobustPolicyPair,
                 obs: np.ndarray,
                 noise: Optional[Tuple[float, float]] = None,
                 rng: Optional[np.random.Generator] = None,
                 adversary_rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Executed action a = α·ν_ω(Φ) + (1-α)·μ_θ(Φ), clipped to the action box.

    With ``noise`` each head gets its own Gaussian draw before mixing
    (``adversary_rng`` defaults to ``rng``).
    """
    agent_action = pair.agent.forward(obs)
    adversary_action = pair.adversary.forward(obs)
    if noise is not None:
        if rng is None:
            raise ValueError("rng is required when exploration noise is requested")
        agent_action = agent_action + exploration_noise(rng, noise, pair.action_dim)
        adversary_action = adversary_action + exploration_noise(
            adversary_rng or rng, noise, pair.action_dim)
    return compose_action(agent_action, adversary_action, pair.alpha, pair.low, pair.high)


def _critic_action_gradient(critic: Mlp, obs: np.ndarray, action: np.ndarray, obs_dim: int) -> np.ndarray:
    _, cache = critic.forward_with_cache(np.concatenate([obs, action], axis=1))
    _, grad_input = critic.backward(cache, np.ones((len(obs), 1)))
    return grad_input[:, obs_dim:]


def critic_target(batch: Batch,
                  pair: RobustPolicyPair,
                  gamma: float,
                  mixture: str = "mixed") -> np.ndarray:
    """
    Bootstrapped targets y = r + γ(1-𝔡)·Q'(Φ', ·).

    ``mixed`` evaluates Q' at the composed target action (1-α)μ' + αν';
    ``expected`` uses (1-α)Q'(Φ', μ') + αQ'(Φ', ν') (takeover dynamics).
    """
    if mixture not in MIXTURES:
        raise ValueError(f"mixture must be one of {MIXTURES}")
    mu = pair.agent_target.forward(batch.next_obs)
    nu = pair.adversary_target.forward(batch.next_obs)
    if mixture == "mixed":
        action = compose_action(mu, nu, pair.alpha)
        next_q = pair.critic_target.forward(np.concatenate([batch.next_obs, action], axis=1))[:, 0]
    else:
        q_mu = pair.critic_target.forward(np.concatenate([batch.next_obs, mu], axis=1))[:, 0]
        q_nu = pair.critic_target.forward(np.concatenate([batch.next_obs, nu], axis=1))[:, 0]
        next_q = (1.0 - pair.alpha) * q_mu + pair.alpha * q_nu
    return batch.rewards + gamma * (1.0 - batch.dones) * next_q


def critic_loss(batch: Batch,
                pair: RobustPolicyPair,
                targets: np.ndarray) -> Tuple[float, Params]:
    """Mean squared error (1/N)Σ(y - Q_φ(Φ, a))² and its parameter gradients."""
    q, cache = pair.critic.forward_with_cache(np.concatenate([batch.obs, batch.actions], axis=1))
    errors = q[:, 0] - np.asarray(targets, dtype=float)
    n = len(errors)
    loss = float(np.mean(errors ** 2))
    grads, _ = pair.critic.backward(cache, (2.0 / n * errors)[:, None])
    return loss, grads


def policy_gradients(batch: Batch,
                     pair: RobustPolicyPair,
                     mixture: str = "mixed") -> Tuple[Params, Params]:
    """
    Ascent directions ∇_θJ and ∇_ωJ of the joint objective.

    The agent gradient carries the factor (1-α) and the adversary gradient
    the factor α. ``mixed`` takes ∇_aQ at the composed action; ``expected``
    takes it at each head's own action. The adversary descends along its
    gradient.
    """
    if mixture not in MIXTURES:
        raise ValueError(f"mixture must be one of {MIXTURES}")
    obs = batch.obs
    n = len(obs)
    mu, mu_cache = pair.agent.forward_with_cache(obs)
    nu, nu_cache = pair.adversary.forward_with_cache(obs)
    if mixture == "mixed":
        dq = _critic_action_gradient(pair.critic, obs, compose_action(mu, nu, pair.alpha), pair.obs_dim)
        dq_agent = dq_adversary = dq
    else:
        dq_agent = _critic_action_gradient(pair.critic, obs, mu, pair.obs_dim)
        dq_adversary = _critic_action_gradient(pair.critic, obs, nu, pair.obs_dim)
    grads_agent, _ = pair.agent.backward(mu_cache, (1.0 - pair.alpha) / n * dq_agent)
    grads_adversary, _ = pair.adversary.backward(nu_cache, pair.alpha / n * dq_adversary)
    return grads_agent, grads_adversary


__all__ = [
    "RobustPolicyPair",
    "compose_action",
    "exploration_noise",
    "mixed_action",
    "critic_target",
    "critic_loss",
    "policy_gradients",
]
