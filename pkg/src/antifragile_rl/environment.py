"""
UAV deconfliction environment built on the IFDS flow field.

The agent does not steer the UAV directly: each action is the triple
(rho0, sigma0, theta) that shapes the flow field for one step. The
observation stacks the goal offset, the nearest-obstacle offset and that
obstacle's velocity. Scenarios (obstacles, motion laws, goal, reward weights)
are JSON files; the canonical ones ship in ``antifragile_rl/data/scenarios``.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import DegenerateGeometryError, EpisodeFinishedError, StartPositionError
from .flowfield import (
    IfdsParams,
    ObstacleKinematics,
    ObstacleShape,
    disturbed_flow,
    gamma,
    initial_flow,
)
from .utils.helpers import as_vec3
from .utils.validation import require_int, require_positive, validate_mapping

logger = logging.getLogger(__name__)

OBS_DIM = 9
ACTION_DIM = 3
ACTION_LOW = np.array([0.1, 0.1, 0.0])
ACTION_HIGH = np.array([3.0, 3.0, 2.0 * math.pi])

MOTION_KINDS = ("static", "circular_drift", "sinusoid")

LOG_COLUMNS = [
    "episode", "step", "x", "y", "z", "r1", "r2", "r3", "reward",
    "conflict", "intrusion", "reached_goal", "rho0", "sigma0", "theta",
]


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AgentObs:
    """Observation: goal offset, nearest-obstacle offset, obstacle velocity."""

    rel_goal: np.ndarray
    rel_obs: np.ndarray
    obs_vel: np.ndarray

    def __post_init__(self):
        for name in ("rel_goal", "rel_obs", "obs_vel"):
            object.__setattr__(self, name, as_vec3(getattr(self, name), name))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.rel_goal, self.rel_obs, self.obs_vel])

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "AgentObs":
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.shape != (OBS_DIM,):
            raise ValueError(f"Observation must have {OBS_DIM} components, got {values.shape[0]}")
        return cls(values[0:3], values[3:6], values[6:9])


@dataclass(frozen=True)
class RewardWeights:
    lambda1: float = -1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    c1: float = 10.0
    c2: float = 1.0
    eps_goal: float = 0.2
    threat_margin: float = 0.4

    def __post_init__(self):
        for name in ("c1", "c2", "eps_goal", "threat_margin"):
            require_positive(name, getattr(self, name))
        for name in ("lambda1", "lambda2", "lambda3"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True, eq=False)
class EpisodeConfig:
    """Start distribution, goal, kinematic limits and episode accounting."""

    start_mean: Tuple[float, float, float] = (0.0, 2.0, 5.0)
    start_var: float = 0.5
    goal: Tuple[float, float, float] = (10.0, 10.0, 5.5)
    max_ascent: float = 5.0 * math.pi / 9.0
    max_descent: float = -15.0 * math.pi / 36.0
    protect_radius: float = 1.5
    conflict_buffer: float = 0.4
    max_steps: int = 500
    n_obstacles: Optional[int] = None
    max_start_retries: int = 100

    def __post_init__(self):
        object.__setattr__(self, "start_mean", tuple(as_vec3(self.start_mean, "start_mean")))
        object.__setattr__(self, "goal", tuple(as_vec3(self.goal, "goal")))
        if not 0.0 <= float(self.start_var) <= 1.0:
            raise ValueError(f"start_var must lie in [0, 1], got {self.start_var}")
        if not self.max_descent < 0.0 < self.max_ascent:
            raise ValueError("max_descent must be negative and max_ascent positive")
        require_positive("protect_radius", self.protect_radius)
        require_positive("conflict_buffer", self.conflict_buffer)
        require_int("max_steps", self.max_steps)
        require_int("max_start_retries", self.max_start_retries)
        if self.n_obstacles is not None:
            require_int("n_obstacles", self.n_obstacles, minimum=0)


@dataclass(frozen=True)
class ObstacleMotion:
    """
    Motion law of one obstacle.

    ``circular_drift``: x(t) = x(t-1) + A cos(ωt), y(t) = y(t-1) + A sin(ωt).
    ``sinusoid``: P(t) = P0 + A ⊙ sin(ωt + φ) per axis.
    """

    kind: str = "static"
    amplitude: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    frequency: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    phase: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in MOTION_KINDS:
            raise ValueError(f"Unknown motion kind {self.kind!r}; expected one of {MOTION_KINDS}")
        for name in ("amplitude", "frequency", "phase"):
            value = getattr(self, name)
            if np.isscalar(value):
                value = (value, value, value)
            object.__setattr__(self, name, tuple(as_vec3(value, name)))

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ObstacleMotion":
        return cls(**dict(raw))


@dataclass(frozen=True)
class RewardComponents:
    r1: Optional[float]
    r2: float
    r3: Optional[float]


@dataclass(frozen=True, eq=False)
class StepOutcome:
    next_obs: AgentObs
    reward: float
    done: bool
    conflict: bool
    reached_goal: bool
    intrusion: bool = False
    components: Optional[RewardComponents] = None
    position: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class ScenarioObstacle:
    shape: ObstacleShape
    motion: ObstacleMotion = field(default_factory=ObstacleMotion)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything an environment needs besides its random generator."""

    name: str
    obstacles: Tuple[ScenarioObstacle, ...] = ()
    ifds: IfdsParams = field(default_factory=IfdsParams)
    reward_weights: RewardWeights = field(default_factory=RewardWeights)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    normalize_weights: bool = False
    description: str = ""

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "Scenario":
        """Build a scenario from its JSON form (see docs/scenarios.md)."""
        check = validate_mapping(raw, ("name", "description", "obstacles", "ifds",
                                       "reward_weights", "episode"), "scenario")
        if not check['is_valid']:
            raise ValueError("; ".join(check['errors']))

        ifds_raw = dict(raw.get("ifds", {}))
        normalize = bool(ifds_raw.pop("normalize_weights", False))
        obstacles = []
        for index, item in enumerate(raw.get("obstacles", [])):
            item = dict(item)
            motion = ObstacleMotion.from_dict(item.pop("motion", {"kind": "static"}))
            try:
                shape = ObstacleShape(**item)
            except TypeError as exc:
                raise ValueError(f"scenario.obstacles[{index}]: {exc}") from exc
            obstacles.append(ScenarioObstacle(shape, motion))

        return cls(
            name=str(raw.get("name", "scenario")),
            obstacles=tuple(obstacles),
            ifds=IfdsParams(**ifds_raw),
            reward_weights=RewardWeights(**raw.get("reward_weights", {})),
            episode=EpisodeConfig(**raw.get("episode", {})),
            normalize_weights=normalize,
            description=str(raw.get("description", "")),
        )

    def to_dict(self) -> Dict[str, Any]:
        ifds = asdict(self.ifds)
        ifds["normalize_weights"] = self.normalize_weights
        for key in ("rho0", "sigma0", "theta"):
            ifds.pop(key)
        episode = {f.name: getattr(self.episode, f.name) for f in fields(EpisodeConfig)}
        return {
            "name": self.name,
            "description": self.description,
            "ifds": ifds,
            "reward_weights": asdict(self.reward_weights),
            "episode": {k: list(v) if isinstance(v, tuple) else v for k, v in episode.items()},
            "obstacles": [
                {
                    "center": o.shape.center.tolist(),
                    "semi_axes": list(o.shape.semi_axes),
                    "exponents": list(o.shape.exponents),
                    "motion": {k: list(v) if isinstance(v, tuple) else v
                               for k, v in asdict(o.motion).items()},
                }
                for o in self.obstacles
            ],
        }


def load_scenario(source: Union[str, Path, Mapping[str, Any]]) -> Scenario:
    """
    Load a scenario by built-in name, file path or parsed mapping.

    Built-in names: ``training``, ``testing``, ``open_field``.
    """
    if isinstance(source, Mapping):
        return Scenario.from_dict(source)
    path = Path(source)
    if path.suffix != ".json" and not path.exists():
        resource = resources.files("antifragile_rl") / "data" / "scenarios" / f"{source}.json"
        if not resource.is_file():
            raise FileNotFoundError(f"No built-in scenario named {source!r}")
        return Scenario.from_dict(json.loads(resource.read_text(encoding="utf-8")))
    if not path.exists():
        raise FileNotFoundError(f"Scenario file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return Scenario.from_dict(json.load(f))


# ---------------------------------------------------------------------------
# Obstacle motion
# ---------------------------------------------------------------------------

def obstacle_step(t: int,
                  centers: np.ndarray,
                  origins: Optional[np.ndarray] = None,
                  motions: Optional[Sequence[ObstacleMotion]] = None) -> np.ndarray:
    """
    Advance obstacle centres to time ``t`` (radians argument).

    Without ``motions`` every obstacle follows the training law
    x += 2cos(t), y += 2sin(t), z unchanged.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if motions is None:
        motions = [ObstacleMotion("circular_drift", amplitude=2.0)] * len(centers)
    if origins is None:
        origins = centers
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    if len(motions) != len(centers):
        raise ValueError("One motion law is required per obstacle")

    moved = centers.copy()
    for i, motion in enumerate(motions):
        amplitude = np.asarray(motion.amplitude)
        omega = np.asarray(motion.frequency)
        if motion.kind == "circular_drift":
            moved[i, 0] += amplitude[0] * math.cos(omega[0] * t)
            moved[i, 1] += amplitude[1] * math.sin(omega[1] * t)
        elif motion.kind == "sinusoid":
            moved[i] = origins[i] + amplitude * np.sin(omega * t + np.asarray(motion.phase))
    return moved


# ---------------------------------------------------------------------------
# Rewards
# ---------------------------------------------------------------------------

def reward_r1(p_next: Sequence[float], obstacle: ObstacleShape) -> Optional[float]:
    """‖P-O‖/R inside the bounding sphere, otherwise None (inactive)."""
    distance = float(np.linalg.norm(np.asarray(p_next, dtype=float) - obstacle.center))
    radius = obstacle.bounding_radius
    if distance <= radius:
        return distance / radius
    return None


def reward_r2(p_next: Sequence[float],
              p_obs: Sequence[float],
              goal: Sequence[float],
              weights: RewardWeights) -> float:
    """-‖P-Pg‖/‖Pobs-Pg‖, plus C1 when within eps_goal of the goal."""
    goal = np.asarray(goal, dtype=float)
    reference = float(np.linalg.norm(np.asarray(p_obs, dtype=float) - goal))
    if reference == 0.0:
        raise DegenerateGeometryError("Obstacle reference point coincides with the goal")
    distance = float(np.linalg.norm(np.asarray(p_next, dtype=float) - goal))
    value = -distance / reference
    if distance <= weights.eps_goal:
        value += weights.c1
    return value


def reward_r3(p_next: Sequence[float],
              obstacle: ObstacleShape,
              weights: RewardWeights) -> Optional[float]:
    """
    |‖P-O‖ - (R+r)|/R - C2 inside the threat band R < ‖P-O‖ <= R+r, otherwise None.

    The outer edge belongs to the band so the penalty reaches -C2 there.
    """
    distance = float(np.linalg.norm(np.asarray(p_next, dtype=float) - obstacle.center))
    radius = obstacle.bounding_radius
    outer = radius + weights.threat_margin
    if radius < distance <= outer:
        return abs(distance - outer) / radius - weights.c2
    return None


def total_reward(components: RewardComponents, weights: RewardWeights) -> float:
    """λ1R1 + λ2R2 + λ3R3 with inactive components contributing 0."""
    r1 = components.r1 or 0.0
    r3 = components.r3 or 0.0
    return weights.lambda1 * r1 + weights.lambda2 * components.r2 + weights.lambda3 * r3


def clamp_flight_path(delta: np.ndarray, max_ascent: float, max_descent: float) -> np.ndarray:
    """
    Limit the flight-path angle of a displacement by rescaling its z part.

    The horizontal part is kept as is.
    """
    delta = np.asarray(delta, dtype=float).copy()
    horizontal = math.hypot(delta[0], delta[1])
    if not np.any(delta):
        return delta
    angle = math.atan2(delta[2], horizontal)
    if max_ascent < math.pi / 2 and angle > max_ascent:
        delta[2] = horizontal * math.tan(max_ascent)
    elif max_descent > -math.pi / 2 and angle < max_descent:
        delta[2] = horizontal * math.tan(max_descent)
    return delta


def flight_path_angle(delta: np.ndarray) -> float:
    norm = float(np.linalg.norm(delta))
    if norm == 0.0:
        return 0.0
    return math.asin(max(-1.0, min(1.0, delta[2] / norm)))


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------

class UavDeconflictionEnv:
    """
    Single-UAV deconfliction MDP.

    One instance is owned by one trainer or evaluator. All randomness
    (start positions) comes from ``self.rng``.
    """

    obs_dim = OBS_DIM
    action_dim = ACTION_DIM

    def __init__(self,
                 scenario: Union[Scenario, str, Path],
                 config: Optional[EpisodeConfig] = None,
                 seed: Optional[int] = None,
                 record_log: bool = False):
        if not isinstance(scenario, Scenario):
            scenario = load_scenario(scenario)
        self.scenario = scenario
        self.config = config or scenario.episode
        if self.config.n_obstacles is not None and self.config.n_obstacles != len(scenario.obstacles):
            raise ValueError(f"Scenario {scenario.name!r} has {len(scenario.obstacles)} obstacles, "
                             f"config expects {self.config.n_obstacles}")
        self.goal = np.asarray(self.config.goal, dtype=float)
        self.action_low = ACTION_LOW.copy()
        self.action_high = ACTION_HIGH.copy()
        self.record_log = record_log
        self.rng = np.random.default_rng(seed)

        self._origins = np.array([o.shape.center for o in scenario.obstacles]).reshape(-1, 3)
        self._motions = [o.motion for o in scenario.obstacles]
        self._centers = self._origins.copy()
        self._velocities = np.zeros_like(self._origins)
        self._position = np.asarray(self.config.start_mean, dtype=float)
        self._start_position = self._position.copy()
        self._steps = 0
        self._done = True
        self.episode_index = -1
        self.path_length = 0.0
        self._log_rows: List[Dict[str, Any]] = []

    # -----------------------------
    # State access
    # -----------------------------

    @property
    def position(self) -> np.ndarray:
        return self._position.copy()

    @property
    def steps(self) -> int:
        return self._steps

    @property
    def done(self) -> bool:
        return self._done

    @property
    def obstacle_centers(self) -> np.ndarray:
        return self._centers.copy()

    @property
    def obstacles(self) -> List[ObstacleKinematics]:
        return [
            ObstacleKinematics(o.shape.moved_to(center), velocity)
            for o, center, velocity in zip(self.scenario.obstacles, self._centers, self._velocities)
        ]

    def seed(self, seed: Union[int, np.random.Generator, np.random.SeedSequence, None]) -> None:
        """Replace the environment generator."""
        if isinstance(seed, np.random.Generator):
            self.rng = seed
        else:
            self.rng = np.random.default_rng(seed)

    def nearest_obstacle(self, position: Optional[np.ndarray] = None) -> Optional[int]:
        """Index of the closest obstacle centre (lowest index on ties)."""
        if len(self._centers) == 0:
            return None
        point = self._position if position is None else np.asarray(position, dtype=float)
        distances = np.linalg.norm(self._centers - point, axis=1)
        return int(np.argmin(distances))

    # -----------------------------
    # Episode API
    # -----------------------------

    def reset(self, seed: Optional[int] = None) -> AgentObs:
        """
        Start a new episode.

        The start is drawn from Normal(start_mean, start_var·I) and redrawn
        while it falls inside an obstacle.
        """
        if seed is not None:
            self.seed(seed)
        self._centers = self._origins.copy()
        self._velocities = np.zeros_like(self._origins)
        mean = np.asarray(self.config.start_mean, dtype=float)
        scale = math.sqrt(self.config.start_var)

        for attempt in range(self.config.max_start_retries):
            candidate = mean + scale * self.rng.standard_normal(3)
            if self._is_free(candidate):
                break
            logger.warning(f"Start {candidate.tolist()} lies inside an obstacle, resampling")
        else:
            raise StartPositionError(
                f"No free start position after {self.config.max_start_retries} draws")

        self._position = candidate
        self._start_position = candidate.copy()
        self._steps = 0
        self._done = False
        self.path_length = 0.0
        self.episode_index += 1
        return self.observe()

    def observe(self, position: Optional[np.ndarray] = None) -> AgentObs:
        """
        Observation as seen from ``position`` (the true position by default).

        Spoofing attacks pass a biased position here.
        """
        point = self._position if position is None else as_vec3(position, "position")
        nearest = self.nearest_obstacle(point)
        if nearest is None:
            rel_obs = np.zeros(3)
            obs_vel = np.zeros(3)
        else:
            rel_obs = self._centers[nearest] - point
            obs_vel = self._velocities[nearest]
        return AgentObs(self.goal - point, rel_obs, obs_vel)

    def step(self, action: Sequence[float]) -> StepOutcome:
        """Apply one (rho0, sigma0, theta) action and advance UAV and obstacles."""
        if self._done:
            raise EpisodeFinishedError("Episode is finished; call reset() first")
        action = np.asarray(action, dtype=float).reshape(-1)
        if action.shape != (ACTION_DIM,):
            raise ValueError(f"Action must have {ACTION_DIM} components, got {action.shape[0]}")
        if not np.all(np.isfinite(action)):
            raise ValueError(f"Action must be finite, got {action.tolist()}")
        action = np.clip(action, self.action_low, self.action_high)
        params = self.scenario.ifds.with_action(action)

        try:
            flow = disturbed_flow(self._position, self.goal, self.obstacles, params,
                                  self.scenario.normalize_weights)
        except DegenerateGeometryError:
            logger.warning(f"Degenerate flow at {self._position.tolist()}, using the undisturbed field")
            flow = initial_flow(self._position, self.goal, params.convergence_speed)

        delta = clamp_flight_path(flow * params.dt, self.config.max_ascent, self.config.max_descent)
        next_position = self._position + delta
        self._steps += 1
        self._advance_obstacles(params.dt)

        components = self._reward_components(next_position)
        reward = total_reward(components, self.scenario.reward_weights)
        conflict, intrusion = self._separation_flags(next_position)
        reached = bool(np.linalg.norm(next_position - self.goal) <= self.scenario.reward_weights.eps_goal)

        self._position = next_position
        self.path_length += float(np.linalg.norm(delta))
        self._done = reached or self._steps >= self.config.max_steps

        if self.record_log:
            self._log_rows.append({
                "episode": self.episode_index, "step": self._steps,
                "x": next_position[0], "y": next_position[1], "z": next_position[2],
                "r1": components.r1, "r2": components.r2, "r3": components.r3,
                "reward": reward, "conflict": conflict, "intrusion": intrusion,
                "reached_goal": reached,
                "rho0": action[0], "sigma0": action[1], "theta": action[2],
            })

        return StepOutcome(
            next_obs=self.observe(),
            reward=reward,
            done=self._done,
            conflict=conflict,
            reached_goal=reached,
            intrusion=intrusion,
            components=components,
            position=next_position.copy(),
        )

    def episode_log(self) -> pd.DataFrame:
        """Rows recorded so far (``record_log=True``) as a DataFrame."""
        return pd.DataFrame(self._log_rows, columns=LOG_COLUMNS)

    def clear_log(self) -> None:
        self._log_rows = []

    # -----------------------------
    # Helpers
    # -----------------------------

    def _is_free(self, point: np.ndarray) -> bool:
        return all(gamma(point, o.shape.moved_to(c)) >= 1.0
                   for o, c in zip(self.scenario.obstacles, self._centers))

    def _advance_obstacles(self, dt: float) -> None:
        if len(self._centers) == 0:
            return
        moved = obstacle_step(self._steps, self._centers, self._origins, self._motions)
        self._velocities = (moved - self._centers) / dt
        self._centers = moved

    def _reward_components(self, next_position: np.ndarray) -> RewardComponents:
        weights = self.scenario.reward_weights
        nearest = self.nearest_obstacle(next_position)
        if nearest is None:
            return RewardComponents(None, reward_r2(next_position, self._start_position,
                                                    self.goal, weights), None)
        shape = self.scenario.obstacles[nearest].shape.moved_to(self._centers[nearest])
        return RewardComponents(
            r1=reward_r1(next_position, shape),
            r2=reward_r2(next_position, shape.center, self.goal, weights),
            r3=reward_r3(next_position, shape, weights),
        )

    def _separation_flags(self, point: np.ndarray) -> Tuple[bool, bool]:
        if len(self._centers) == 0:
            return False, False
        distances = np.linalg.norm(self._centers - point, axis=1)
        radii = np.array([o.shape.bounding_radius for o in self.scenario.obstacles])
        conflict = bool(np.any(distances < radii + self.config.conflict_buffer))
        intrusion = bool(np.any(distances < radii + self.config.protect_radius))
        return conflict, intrusion


def make_env(scenario: Union[Scenario, str, Path] = "training",
             seed: Optional[int] = None,
             record_log: bool = False,
             **episode_overrides: Any) -> UavDeconflictionEnv:
    """Build an environment, optionally overriding EpisodeConfig fields."""
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    config = replace(scenario.episode, **episode_overrides) if episode_overrides else None
    return UavDeconflictionEnv(scenario, config=config, seed=seed, record_log=record_log)


__all__ = [
    "OBS_DIM",
    "ACTION_DIM",
    "ACTION_LOW",
    "ACTION_HIGH",
    "AgentObs",
    "RewardWeights",
    "EpisodeConfig",
    "ObstacleMotion",
    "RewardComponents",
    "StepOutcome",
    "ScenarioObstacle",
    "Scenario",
    "UavDeconflictionEnv",
    "load_scenario",
    "make_env",
    "obstacle_step",
    "reward_r1",
    "reward_r2",
    "reward_r3",
    "total_reward",
    "clamp_flight_path",
    "flight_path_angle",
]
