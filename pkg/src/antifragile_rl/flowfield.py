"""
Interfered fluid dynamics flow field around 3D obstacles.

A goal-converging initial flow is bent around each obstacle by a disturbance
matrix built from the obstacle's radial normal and a tangential direction.
Moving obstacles add a speed field that fades with distance. The UAV follows
the resulting field with explicit Euler steps.

Obstacles are the convex family

    Γ(P) = ((x-x0)/a)^(2p) + ((y-y0)/b)^(2q) + ((z-z0)/c)^(2r)

with Γ < 1 inside, Γ = 1 on the surface and Γ > 1 outside.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import DegenerateGeometryError
from .utils.helpers import as_vec3
from .utils.validation import require_positive

logger = logging.getLogger(__name__)

Vec3 = np.ndarray

GOAL_TOLERANCE = 1e-9
GAMMA_FLOOR = 1.0 + 1e-6
_NORM_EPS = 1e-12
_MAX_LOG_POWER = 700.0


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ObstacleShape:
    """Convex obstacle of the Γ family: centre, semi-axes and exponents."""

    center: np.ndarray
    semi_axes: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    exponents: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center, "center"))
        axes = as_vec3(self.semi_axes, "semi_axes")
        if np.any(axes <= 0.0):
            raise ValueError(f"semi_axes must be positive, got {axes.tolist()}")
        exps = as_vec3(self.exponents, "exponents")
        if np.any(exps < 0.5):
            raise ValueError(f"exponents must be >= 0.5, got {exps.tolist()}")
        object.__setattr__(self, "semi_axes", tuple(float(a) for a in axes))
        object.__setattr__(self, "exponents", tuple(float(e) for e in exps))

    @property
    def bounding_radius(self) -> float:
        """Radius R_obs used by the reward and conflict tests."""
        return max(self.semi_axes)

    def moved_to(self, center: Sequence[float]) -> "ObstacleShape":
        return ObstacleShape(center, self.semi_axes, self.exponents)


@dataclass(frozen=True)
class IfdsParams:
    """
    Flow-field constants plus the action triple (rho0, sigma0, theta).

    ``theta`` is one angle shared by every obstacle or a tuple with one
    angle per obstacle.
    """

    rho0: float = 1.0
    sigma0: float = 1.0
    theta: Union[float, Tuple[float, ...]] = 0.0
    upsilon: float = 1.0
    convergence_speed: float = 1.0
    dt: float = 0.1

    def __post_init__(self):
        for name in ("rho0", "sigma0", "upsilon", "convergence_speed", "dt"):
            object.__setattr__(self, name, require_positive(name, getattr(self, name)))
        if isinstance(self.theta, (list, tuple, np.ndarray)):
            angles = tuple(float(a) for a in self.theta)
            if not angles or not all(math.isfinite(a) for a in angles):
                raise ValueError("theta must contain finite angles")
            object.__setattr__(self, "theta", angles)
        else:
            if not math.isfinite(float(self.theta)):
                raise ValueError("theta must be finite")
            object.__setattr__(self, "theta", float(self.theta))

    def theta_for(self, n: int) -> float:
        if isinstance(self.theta, tuple):
            return self.theta[n % len(self.theta)]
        return self.theta

    def with_action(self, action: Sequence[float]) -> "IfdsParams":
        """Copy with (rho0, sigma0, theta) taken from an action vector."""
        rho0, sigma0, theta = (float(v) for v in np.asarray(action, dtype=float)[:3])
        return replace(self, rho0=rho0, sigma0=sigma0, theta=theta)


@dataclass(frozen=True, eq=False)
class ObstacleKinematics:
    """Obstacle shape at the current time plus its velocity."""

    shape: ObstacleShape
    velocity: np.ndarray = None

    def __post_init__(self):
        velocity = np.zeros(3) if self.velocity is None else self.velocity
        object.__setattr__(self, "velocity", as_vec3(velocity, "velocity"))


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def gamma(p: Vec3, shape: ObstacleShape) -> float:
    """Shape function Γ(P) of one obstacle."""
    scaled = (np.asarray(p, dtype=float) - shape.center) / np.asarray(shape.semi_axes)
    return float(np.sum(np.abs(scaled) ** (2.0 * np.asarray(shape.exponents))))


def radial_normal(p: Vec3, shape: ObstacleShape) -> Vec3:
    """
    Analytic gradient ∇Γ(P).

    Raises:
        DegenerateGeometryError: when the gradient vanishes (P at the centre)
    """
    axes = np.asarray(shape.semi_axes)
    power = 2.0 * np.asarray(shape.exponents)
    scaled = (np.asarray(p, dtype=float) - shape.center) / axes
    grad = power * np.abs(scaled) ** (power - 1.0) * np.sign(scaled) / axes
    if np.linalg.norm(grad) <= _NORM_EPS:
        raise DegenerateGeometryError(f"Radial normal vanishes at {np.asarray(p).tolist()}")
    return grad


def tangential_frame(p: Vec3, shape: ObstacleShape, theta: float) -> Vec3:
    """
    Unit tangential direction h = cos(θ)·ĥ1 + sin(θ)·ĥ2.

    ĥ1 = (Γy, -Γx, 0) and ĥ2 = t × h1 = (ΓxΓz, ΓyΓz, -Γx²-Γy²), both
    normalized. At the poles (Γx = Γy = 0) h1 falls back to (Γz, 0, -Γx).
    """
    t = radial_normal(p, shape)
    h1 = np.array([t[1], -t[0], 0.0])
    if np.linalg.norm(h1) <= _NORM_EPS * np.linalg.norm(t):
        h1 = np.array([t[2], 0.0, -t[0]])
    h2 = np.cross(t, h1)
    h1 = h1 / np.linalg.norm(h1)
    h2 = h2 / np.linalg.norm(h2)
    return math.cos(theta) * h1 + math.sin(theta) * h2


# ---------------------------------------------------------------------------
# Weights and disturbance matrices
# ---------------------------------------------------------------------------

def _disturbance_weights(gammas: np.ndarray) -> np.ndarray:
    count = len(gammas)
    if count == 1:
        return np.ones(1)
    excess = np.maximum(np.asarray(gammas, dtype=float), GAMMA_FLOOR) - 1.0
    weights = np.ones(count)
    for n in range(count):
        for i in range(count):
            if i != n:
                weights[n] *= excess[i] / (excess[i] + excess[n])
    return weights


def disturbance_weight(p: Vec3, shapes: Sequence[ObstacleShape], n: int) -> float:
    """
    Weight of obstacle ``n`` among ``shapes`` at P.

    1 for a single obstacle, otherwise Π_{i≠n} (Γi-1)/((Γi-1)+(Γn-1)) with
    each Γ floored at 1+1e-6 so the denominators stay positive.
    """
    if not shapes:
        raise ValueError("shapes must not be empty")
    if not 0 <= n < len(shapes):
        raise ValueError(f"Obstacle index {n} out of range for {len(shapes)} obstacles")
    gammas = np.array([gamma(p, s) for s in shapes])
    return float(_disturbance_weights(gammas)[n])


def _response_coefficient(base: float, p: Vec3, goal: Vec3, center: Vec3) -> float:
    # base * exp(1 - 1/(|P-Pd| |P-On|)); the distance to the obstacle is centre-based
    product = float(np.linalg.norm(p - goal) * np.linalg.norm(p - center))
    return base * math.exp(1.0 - 1.0 / max(product, _NORM_EPS))


def _gamma_power(gamma_value: float, coefficient: float) -> float:
    exponent = math.log(gamma_value) / max(coefficient, _NORM_EPS)
    return math.exp(min(exponent, _MAX_LOG_POWER))


def single_obstacle_matrix(p: Vec3,
                           shape: ObstacleShape,
                           params: IfdsParams,
                           goal: Vec3,
                           n: int = 0) -> np.ndarray:
    """
    Disturbance matrix of one obstacle.

    M = I - t tᵀ/(Γ^(1/ϱ) tᵀt) + h tᵀ/(Γ^(1/ς) ‖h‖‖t‖), with Γ floored at 1
    so points on or inside the surface get the full radial cancellation.
    ``n`` selects the per-obstacle tangential angle.
    """
    p = np.asarray(p, dtype=float)
    goal = np.asarray(goal, dtype=float)
    gamma_value = max(gamma(p, shape), 1.0)
    t = radial_normal(p, shape)
    h = tangential_frame(p, shape, params.theta_for(n))

    rho = _response_coefficient(params.rho0, p, goal, shape.center)
    sigma = _response_coefficient(params.sigma0, p, goal, shape.center)

    radial = np.outer(t, t) / (_gamma_power(gamma_value, rho) * float(t @ t))
    tangential = np.outer(h, t) / (
        _gamma_power(gamma_value, sigma) * np.linalg.norm(h) * np.linalg.norm(t))
    return np.eye(3) - radial + tangential


# ---------------------------------------------------------------------------
# Flow fields
# ---------------------------------------------------------------------------

def initial_flow(p: Vec3, goal: Vec3, c: float) -> Vec3:
    """Goal-converging flow u = -C·(P-Pd)/‖P-Pd‖; zero at the goal."""
    offset = np.asarray(p, dtype=float) - np.asarray(goal, dtype=float)
    distance = float(np.linalg.norm(offset))
    if distance <= GOAL_TOLERANCE:
        return np.zeros(3)
    return -c * offset / distance


def obstacle_speed_field(p: Vec3,
                         obstacles: Sequence[ObstacleKinematics],
                         params: IfdsParams,
                         weights: Optional[np.ndarray] = None) -> Vec3:
    """Speed threat v_obs = Σ w_n exp(-Γ_n/Υ) V_n."""
    if not obstacles:
        return np.zeros(3)
    gammas = np.array([gamma(p, o.shape) for o in obstacles])
    if weights is None:
        weights = _disturbance_weights(gammas)
    field = np.zeros(3)
    for weight, gamma_value, obstacle in zip(weights, gammas, obstacles):
        field += weight * math.exp(-gamma_value / params.upsilon) * obstacle.velocity
    return field


def disturbed_flow(p: Vec3,
                   goal: Vec3,
                   obstacles: Sequence[ObstacleKinematics],
                   params: IfdsParams,
                   normalize_weights: bool = False) -> Vec3:
    """
    Synthetic flow ū = M̄(u - v_obs) + v_obs with M̄ = Σ w_n M_n.

    With no obstacles M̄ = I and v_obs = 0. ``normalize_weights`` rescales the
    weights to sum to one (the product formula does not for three or more
    obstacles).
    """
    p = np.asarray(p, dtype=float)
    u = initial_flow(p, goal, params.convergence_speed)
    if not obstacles:
        return u

    gammas = np.array([gamma(p, o.shape) for o in obstacles])
    weights = _disturbance_weights(gammas)
    if normalize_weights:
        weights = weights / weights.sum()

    v_obs = obstacle_speed_field(p, obstacles, params, weights)
    m_bar = np.zeros((3, 3))
    for n, (weight, obstacle) in enumerate(zip(weights, obstacles)):
        m_bar += weight * single_obstacle_matrix(p, obstacle.shape, params, goal, n)
    return m_bar @ (u - v_obs) + v_obs


def step_position(p: Vec3, flow: Vec3, dt: float) -> Vec3:
    """Explicit Euler step P + ū·ΔT."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return np.asarray(p, dtype=float) + np.asarray(flow, dtype=float) * dt


# ---------------------------------------------------------------------------
# Field object
# ---------------------------------------------------------------------------

class FlowField:
    """Flow field bound to a goal and a set of obstacles."""

    def __init__(self,
                 goal: Sequence[float],
                 obstacles: Optional[Sequence[ObstacleKinematics]] = None,
                 params: Optional[IfdsParams] = None,
                 normalize_weights: bool = False):
        self.goal = as_vec3(goal, "goal")
        self.obstacles: List[ObstacleKinematics] = list(obstacles or [])
        self.params = params or IfdsParams()
        self.normalize_weights = normalize_weights

    def flow_at(self, p: Vec3, params: Optional[IfdsParams] = None) -> Vec3:
        return disturbed_flow(p, self.goal, self.obstacles, params or self.params,
                              self.normalize_weights)

    def advance(self, p: Vec3, params: Optional[IfdsParams] = None) -> Vec3:
        params = params or self.params
        return step_position(p, self.flow_at(p, params), params.dt)

    def trace(self, start: Sequence[float], steps: int,
              params: Optional[IfdsParams] = None) -> np.ndarray:
        """Positions visited over ``steps`` Euler steps from ``start`` (static obstacles)."""
        path = [as_vec3(start, "start")]
        for _ in range(steps):
            path.append(self.advance(path[-1], params))
        return np.vstack(path)


__all__ = [
    "Vec3",
    "ObstacleShape",
    "IfdsParams",
    "ObstacleKinematics",
    "FlowField",
    "gamma",
    "initial_flow",
    "radial_normal",
    "tangential_frame",
    "disturbance_weight",
    "single_obstacle_matrix",
    "obstacle_speed_field",
    "disturbed_flow",
    "step_position",
    "GOAL_TOLERANCE",
    "GAMMA_FLOOR",
]
