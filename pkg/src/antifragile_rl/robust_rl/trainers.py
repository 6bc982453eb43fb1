"""
Actor-critic trainers and the entropy-gap ensemble builder.

Every trainer runs on one engine, :class:`DdpgTrainer`:

- ``vanilla``: plain DDPG (the action-robust trainer at α = 0)
- ``action_robust``: executed action α·ν + (1-α)·μ, agent ascent and
  adversary descent with preconditioned Langevin noise
- ``nr_mdp``: the same mixed action, adversary updated every
  ``adversary_period`` ticks
- ``pr_mdp``: the adversary takes over with probability α; expected
  mixture target, alternating adversary updates
- ``adversarial``: vanilla DDPG acting on and storing FGSM observations

Randomness is split into named streams so a zero perturbation knob leaves
the agent's path through training untouched.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..attacks import fgsm
from ..environment import UavDeconflictionEnv
from ..exceptions import EnsembleEmptyError, TrainingDivergedError
from ..neural import (
    AdamOptimizer,
    MomentumOptimizer,
    SgldNoiseState,
    flatten,
    sgld_perturb,
    soft_update,
    unflatten,
)
from ..utils.helpers import SeedLike, format_alpha, seed_sequence, spawn_generators
from ..utils.validation import require_int, require_non_negative, require_positive, require_probability
from .agents import (
    RobustPolicyPair,
    compose_action,
    critic_loss,
    critic_target,
    exploration_noise,
    policy_gradients,
)
from .entropy import EntropyGapReport, entropy_gap
from .replay import ReplayBuffer

logger = logging.getLogger(__name__)

TRAINER_KINDS = ("vanilla", "action_robust", "nr_mdp", "pr_mdp", "adversarial")

# append new streams at the end; inserting would reshuffle existing ones
RNG_STREAMS = (
    "init",
    "env",
    "explore_agent",
    "explore_adversary",
    "replay",
    "sgld_agent",
    "sgld_adversary",
    "takeover",
)


@dataclass(frozen=True)
class TrainingConfig:
    """Training hyperparameters; defaults follow the reference setup."""

    episodes: int = 200
    exploration_episodes: int = 30
    batch_size: int = 128
    buffer_capacity: int = 1_000_000
    gamma: float = 0.99
    critic_lr: float = 1e-3
    policy_lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    soft_update_rate: float = 0.01
    exploration_noise: Tuple[float, float] = (0.05, 0.02)
    sgld_psi: float = 0.1
    sgld_rho: float = 0.99
    beta: float = 0.9
    inner_iterations: int = 1
    update_every: int = 1
    adversary_period: int = 2
    entropy_bins: int = 16
    entropy_threshold: float = 0.5
    alpha_grid: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4)
    hidden_units: int = 128
    adversarial_epsilon: float = 1.0
    progress: bool = False

    def __post_init__(self):
        require_int("episodes", self.episodes)
        require_int("exploration_episodes", self.exploration_episodes, minimum=0)
        if self.exploration_episodes >= self.episodes:
            raise ValueError("exploration_episodes must be smaller than episodes")
        require_int("batch_size", self.batch_size)
        require_int("buffer_capacity", self.buffer_capacity)
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch_size must not exceed buffer_capacity")
        require_probability("gamma", self.gamma)
        require_positive("critic_lr", self.critic_lr)
        require_positive("policy_lr", self.policy_lr)
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        require_non_negative("weight_decay", self.weight_decay)
        require_probability("soft_update_rate", self.soft_update_rate)
        noise = tuple(float(v) for v in self.exploration_noise)
        if len(noise) != 2 or noise[1] < 0:
            raise ValueError("exploration_noise must be (mean, std) with std >= 0")
        object.__setattr__(self, "exploration_noise", noise)
        require_non_negative("sgld_psi", self.sgld_psi)
        if not 0.0 <= self.sgld_rho < 1.0:
            raise ValueError(f"sgld_rho must lie in [0, 1), got {self.sgld_rho}")
        require_probability("beta", self.beta)
        require_int("inner_iterations", self.inner_iterations)
        require_int("update_every", self.update_every)
        require_int("adversary_period", self.adversary_period)
        require_int("entropy_bins", self.entropy_bins)
        grid = tuple(float(a) for a in self.alpha_grid)
        if any(not 0.0 < a <= 1.0 for a in grid):
            raise ValueError("alpha_grid values must lie in (0, 1]")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("alpha_grid must be strictly increasing")
        object.__setattr__(self, "alpha_grid", grid)
        require_int("hidden_units", self.hidden_units)
        require_non_negative("adversarial_epsilon", self.adversarial_epsilon)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "TrainingConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"Unknown training field(s) {unknown}")
        values = dict(raw)
        for key in ("exploration_noise", "alpha_grid"):
            if key in values:
                values[key] = tuple(values[key])
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["exploration_noise"] = list(self.exploration_noise)
        out["alpha_grid"] = list(self.alpha_grid)
        return out


@dataclass
class EpisodeRecord:
    episode: int
    phase: str
    reward: float
    steps: int
    reached_goal: bool
    conflicts: int
    takeovers: int = 0


@dataclass
class TrainingResult:
    """Trained pair with its per-episode history and entropy report."""

    pair: RobustPolicyPair
    kind: str
    alpha: float
    episodes: List[EpisodeRecord]
    entropy: EntropyGapReport
    updates: int = 0
    env_steps: int = 0
    epsilon: float = 0.0

    @property
    def rewards(self) -> List[float]:
        return [e.reward for e in self.episodes]

    @property
    def explore_rewards(self) -> List[float]:
        return [e.reward for e in self.episodes if e.phase == "explore"]

    @property
    def exploit_rewards(self) -> List[float]:
        return [e.reward for e in self.episodes if e.phase == "exploit"]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(e) for e in self.episodes])
        frame.insert(0, "alpha", self.alpha)
        frame.insert(0, "kind", self.kind)
        return frame


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

class DdpgTrainer:
    """
    One trainer owns its environment, buffer, networks and generators.

    Args:
        env: Environment to train in (re-seeded from the ``env`` stream)
        config: Hyperparameters
        kind: One of ``TRAINER_KINDS``
        alpha: Adversary share (ignored for ``vanilla`` and ``adversarial``)
        epsilon: FGSM budget for ``adversarial``
        seed: Integer or SeedSequence for all streams
    """

    def __init__(self,
                 env: UavDeconflictionEnv,
                 config: Optional[TrainingConfig] = None,
                 kind: str = "action_robust",
                 alpha: float = 0.0,
                 epsilon: float = 0.0,
                 seed: SeedLike = 0):
        if kind not in TRAINER_KINDS:
            raise ValueError(f"Unknown trainer kind {kind!r}; expected one of {TRAINER_KINDS}")
        self.config = config or TrainingConfig()
        self.kind = kind
        self.alpha = 0.0 if kind in ("vanilla", "adversarial") else require_probability("alpha", alpha)
        self.epsilon = require_non_negative("epsilon", epsilon) if kind == "adversarial" else 0.0
        self.env = env
        self.rngs = spawn_generators(seed, RNG_STREAMS)
        env.seed(self.rngs["env"])

        cfg = self.config
        self.pair = RobustPolicyPair(env.obs_dim, env.action_dim, env.action_low, env.action_high,
                                     alpha=self.alpha, rng=self.rngs["init"],
                                     hidden=cfg.hidden_units, kind=kind)
        self.buffer = ReplayBuffer(env.obs_dim, env.action_dim, cfg.buffer_capacity)
        self.critic_opt = AdamOptimizer(self.pair.critic.params, cfg.critic_lr,
                                        weight_decay=cfg.weight_decay)
        self.agent_opt = MomentumOptimizer(self.pair.agent.params, cfg.policy_lr,
                                           cfg.momentum, cfg.weight_decay)
        self.adversary_opt = MomentumOptimizer(self.pair.adversary.params, cfg.policy_lr,
                                               cfg.momentum, cfg.weight_decay)
        self.agent_noise = SgldNoiseState(self.pair.agent.n_params, cfg.sgld_rho, cfg.sgld_psi)
        self.adversary_noise = SgldNoiseState(self.pair.adversary.n_params, cfg.sgld_rho, cfg.sgld_psi)

        self.mixture = "expected" if kind == "pr_mdp" else "mixed"
        self.adversary_period = cfg.adversary_period if kind in ("pr_mdp", "nr_mdp") else 1
        self.update_ticks = 0
        self.env_steps = 0
        self.takeovers = 0
        self.last_critic_loss = float("nan")
        self._episode = 0

    # -----------------------------
    # Acting
    # -----------------------------

    def select_action(self, obs: np.ndarray, explore: bool) -> Tuple[np.ndarray, bool]:
        """
        Executed action for one observation and whether the adversary took over.

        Exploration episodes draw both heads uniformly from the action box.
        """
        low, high = self.pair.low, self.pair.high
        if explore:
            agent_action = self.rngs["explore_agent"].uniform(low, high)
            adversary_action = self.rngs["explore_adversary"].uniform(low, high)
        else:
            noise = self.config.exploration_noise
            agent_action = self.pair.agent.forward(obs) + exploration_noise(
                self.rngs["explore_agent"], noise, self.pair.action_dim)
            adversary_action = self.pair.adversary.forward(obs) + exploration_noise(
                self.rngs["explore_adversary"], noise, self.pair.action_dim)

        if self.kind == "pr_mdp":
            took_over = bool(self.rngs["takeover"].random() < self.alpha)
            action = adversary_action if took_over else agent_action
            return np.clip(action, low, high), took_over
        return compose_action(agent_action, adversary_action, self.alpha, low, high), False

    def observation_for_training(self, obs: np.ndarray) -> np.ndarray:
        """FGSM-perturbed observation for ``adversarial``; the clean one otherwise."""
        if self.kind != "adversarial":
            return obs
        return fgsm(obs, self.pair.attack_loss_gradient, self.epsilon)

    # -----------------------------
    # Updates
    # -----------------------------

    def sgld_trainstep(self) -> bool:
        """
        One update tick: K inner iterations then the outer interpolation.

        Returns False (and changes nothing) while the buffer holds fewer
        than ``batch_size`` transitions.
        """
        cfg = self.config
        if len(self.buffer) < cfg.batch_size:
            return False

        pair = self.pair
        beta = cfg.beta
        update_adversary = self.kind not in ("vanilla", "adversarial") \
            and self.update_ticks % self.adversary_period == 0
        theta_t = [p.copy() for p in pair.agent.params]
        omega_t = [p.copy() for p in pair.adversary.params]
        theta_bar = [p.copy() for p in theta_t]
        omega_bar = [p.copy() for p in omega_t]

        for _ in range(cfg.inner_iterations):
            batch = self.buffer.sample(cfg.batch_size, self.rngs["replay"])
            targets = critic_target(batch, pair, cfg.gamma, self.mixture)
            loss, critic_grads = critic_loss(batch, pair, targets)
            if not math.isfinite(loss):
                raise TrainingDivergedError("Critic loss is not finite", self._episode,
                                            self.env_steps, self.alpha)
            self.last_critic_loss = loss
            self.critic_opt.step(pair.critic.params, critic_grads)

            grads_agent, grads_adversary = policy_gradients(batch, pair, self.mixture)
            noisy = sgld_perturb(flatten(grads_agent), self.agent_noise, self.rngs["sgld_agent"])
            # ascent: the optimizer descends along -(g + ψζ)
            self.agent_opt.step(pair.agent.params, unflatten(-noisy, pair.agent.params))
            for bar, current in zip(theta_bar, pair.agent.params):
                bar *= (1.0 - beta)
                bar += beta * current

            if update_adversary:
                noisy = sgld_perturb(flatten(grads_adversary), self.adversary_noise,
                                     self.rngs["sgld_adversary"])
                self.adversary_opt.step(pair.adversary.params,
                                        unflatten(noisy, pair.adversary.params))
                for bar, current in zip(omega_bar, pair.adversary.params):
                    bar *= (1.0 - beta)
                    bar += beta * current

            soft_update(pair.critic_target, pair.critic, cfg.soft_update_rate)
            soft_update(pair.agent_target, pair.agent, cfg.soft_update_rate)
            soft_update(pair.adversary_target, pair.adversary, cfg.soft_update_rate)

        pair.agent.params = [(1.0 - beta) * t + beta * b for t, b in zip(theta_t, theta_bar)]
        if update_adversary:
            pair.adversary.params = [(1.0 - beta) * w + beta * b for w, b in zip(omega_t, omega_bar)]

        if not pair.is_finite():
            raise TrainingDivergedError("Network parameters are not finite", self._episode,
                                        self.env_steps, self.alpha)
        self.update_ticks += 1
        logger.debug(f"Update {self.update_ticks}: critic loss {self.last_critic_loss:.4g}")
        return True

    # -----------------------------
    # Episodes
    # -----------------------------

    def run_episode(self, explore: bool) -> EpisodeRecord:
        cfg = self.config
        obs = self.env.reset().as_array()
        total = 0.0
        conflicts = 0
        takeovers = 0
        while True:
            seen = self.observation_for_training(obs)
            action, took_over = self.select_action(seen, explore)
            outcome = self.env.step(action)
            next_obs = outcome.next_obs.as_array()
            if not math.isfinite(outcome.reward):
                raise TrainingDivergedError("Reward is not finite", self._episode,
                                            self.env_steps, self.alpha)
            self.buffer.add(seen, action, outcome.reward, next_obs, outcome.done)
            self.pair.obs_stats.update(obs)
            self.env_steps += 1
            total += outcome.reward
            conflicts += int(outcome.conflict)
            takeovers += int(took_over)
            if self.env_steps % cfg.update_every == 0:
                self.sgld_trainstep()
            if outcome.done:
                break
            obs = next_obs
        self.takeovers += takeovers
        return EpisodeRecord(self._episode, "explore" if explore else "exploit", total,
                             self.env.steps, bool(outcome.reached_goal), conflicts, takeovers)

    def train(self) -> TrainingResult:
        cfg = self.config
        records: List[EpisodeRecord] = []
        label = f"{self.kind} {format_alpha(self.alpha)}"
        for episode in tqdm(range(cfg.episodes), desc=label, disable=not cfg.progress):
            self._episode = episode
            records.append(self.run_episode(explore=episode < cfg.exploration_episodes))
            if (episode + 1) % 10 == 0:
                recent = np.mean([r.reward for r in records[-10:]])
                logger.info(f"{label}: episode {episode + 1}/{cfg.episodes}, mean reward {recent:.3f}")

        report = entropy_gap(
            [r.reward for r in records if r.phase == "explore"],
            [r.reward for r in records if r.phase == "exploit"],
            bins=cfg.entropy_bins,
        )
        logger.info(f"{label}: entropy gap {report.delta_h:.3f} bits")
        return TrainingResult(self.pair, self.kind, self.alpha, records, report,
                              updates=self.update_ticks, env_steps=self.env_steps,
                              epsilon=self.epsilon)


# ---------------------------------------------------------------------------
# Convenience wrappers
# ---------------------------------------------------------------------------

def train_vanilla_ddpg(env: UavDeconflictionEnv,
                       config: Optional[TrainingConfig] = None,
                       seed: SeedLike = 0) -> TrainingResult:
    return DdpgTrainer(env, config, "vanilla", seed=seed).train()


def train_action_robust(env: UavDeconflictionEnv,
                        alpha: float,
                        config: Optional[TrainingConfig] = None,
                        seed: SeedLike = 0) -> TrainingResult:
    """Action-robust training of one (agent, adversary, critic) triple."""
    return DdpgTrainer(env, config, "action_robust", alpha=alpha, seed=seed).train()


def train_pr_mdp(env: UavDeconflictionEnv,
                 alpha: float,
                 config: Optional[TrainingConfig] = None,
                 seed: SeedLike = 0) -> TrainingResult:
    return DdpgTrainer(env, config, "pr_mdp", alpha=alpha, seed=seed).train()


def train_nr_mdp(env: UavDeconflictionEnv,
                 alpha: float,
                 config: Optional[TrainingConfig] = None,
                 seed: SeedLike = 0) -> TrainingResult:
    return DdpgTrainer(env, config, "nr_mdp", alpha=alpha, seed=seed).train()


def train_adversarial_ddpg(env: UavDeconflictionEnv,
                           epsilon: Optional[float] = None,
                           config: Optional[TrainingConfig] = None,
                           seed: SeedLike = 0) -> TrainingResult:
    """DDPG on FGSM observations; ``epsilon`` defaults to ``config.adversarial_epsilon``."""
    config = config or TrainingConfig()
    if epsilon is None:
        epsilon = config.adversarial_epsilon
    return DdpgTrainer(env, config, "adversarial", epsilon=epsilon, seed=seed).train()


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------

@dataclass
class EnsembleMember:
    alpha: float
    pair: RobustPolicyPair
    entropy: Optional[EntropyGapReport] = None


@dataclass
class EnsembleSet:
    """Ordered policy pairs; the first member is the vanilla (α = 0) policy."""

    members: List[EnsembleMember] = field(default_factory=list)

    def __post_init__(self):
        alphas = self.alphas
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError(f"Ensemble alphas must be strictly increasing, got {alphas}")

    @property
    def alphas(self) -> List[float]:
        return [m.alpha for m in self.members]

    @property
    def pairs(self) -> List[RobustPolicyPair]:
        return [m.pair for m in self.members]

    @property
    def vanilla(self) -> RobustPolicyPair:
        if not self.members or self.members[0].alpha != 0.0:
            raise ValueError("Ensemble has no vanilla member")
        return self.members[0].pair

    @property
    def robust(self) -> List[EnsembleMember]:
        return [m for m in self.members if m.alpha > 0.0]

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[EnsembleMember]:
        return iter(self.members)

    def __getitem__(self, index: int) -> EnsembleMember:
        return self.members[index]

    def save(self, directory: Union[str, Path]) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = []
        for member in self.members:
            name = f"{format_alpha(member.alpha)}.npz"
            member.pair.save(directory / name)
            manifest.append({
                "alpha": member.alpha, "checkpoint": name,
                "entropy": member.entropy.to_dict() if member.entropy else None,
            })
        path = directory / "ensemble.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"members": manifest}, f, indent=2)
        return path

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "EnsembleSet":
        directory = Path(directory)
        path = directory / "ensemble.json"
        if not path.exists():
            raise FileNotFoundError(f"No ensemble manifest in {directory}")
        with open(path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        members = []
        for item in manifest["members"]:
            pair, _ = RobustPolicyPair.load(directory / item["checkpoint"])
            entropy = EntropyGapReport.from_dict(item["entropy"]) if item.get("entropy") else None
            members.append(EnsembleMember(float(item["alpha"]), pair, entropy))
        return cls(members)


def build_ensemble(env: Union[UavDeconflictionEnv, Callable[[], UavDeconflictionEnv]],
                   config: Optional[TrainingConfig] = None,
                   seed: SeedLike = 0,
                   vanilla: Optional[RobustPolicyPair] = None,
                   on_candidate: Optional[Callable[[TrainingResult, bool], None]] = None) -> EnsembleSet:
    """
    Grow the robust ensemble over ``config.alpha_grid``.

    A candidate trained at α joins while its entropy gap exceeds
    ``config.entropy_threshold``; the first candidate at or below the
    threshold ends the search. The vanilla policy (trained unless given)
    is prepended as the α = 0 member. ``on_candidate`` sees every trained
    result with its acceptance flag (the vanilla run counts as accepted).

    Raises:
        EnsembleEmptyError: if the first candidate already fails the test
    """
    config = config or TrainingConfig()
    make_env = env if callable(env) and not isinstance(env, UavDeconflictionEnv) else (lambda: env)

    members: List[EnsembleMember] = []
    for alpha in config.alpha_grid:
        result = train_action_robust(make_env(), alpha, config, seed_sequence(seed, format_alpha(alpha)))
        accepted = result.entropy.delta_h > config.entropy_threshold
        if on_candidate is not None:
            on_candidate(result, accepted)
        if accepted:
            logger.info(f"Accepted {format_alpha(alpha)} (entropy gap {result.entropy.delta_h:.3f})")
            members.append(EnsembleMember(alpha, result.pair, result.entropy))
        else:
            logger.info(f"Stopping at {format_alpha(alpha)}: entropy gap "
                        f"{result.entropy.delta_h:.3f} <= {config.entropy_threshold}")
            break

    if not members:
        raise EnsembleEmptyError(
            f"First candidate failed the entropy-gap threshold {config.entropy_threshold}")

    if vanilla is None:
        vanilla_result = train_vanilla_ddpg(make_env(), config, seed_sequence(seed, format_alpha(0.0)))
        if on_candidate is not None:
            on_candidate(vanilla_result, True)
        members.insert(0, EnsembleMember(0.0, vanilla_result.pair, vanilla_result.entropy))
    else:
        members.insert(0, EnsembleMember(0.0, vanilla))
    return EnsembleSet(members)


__all__ = [
    "TRAINER_KINDS",
    "RNG_STREAMS",
    "TrainingConfig",
    "EpisodeRecord",
    "TrainingResult",
    "DdpgTrainer",
    "train_vanilla_ddpg",
    "train_action_robust",
    "train_pr_mdp",
    "train_nr_mdp",
    "train_adversarial_ddpg",
    "EnsembleMember",
    "EnsembleSet",
    "build_ensemble",
]
