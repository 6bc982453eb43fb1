"""
Small dense-network kernel for the actor-critic trainers.

Networks are plain numpy: a list of weight matrices and bias vectors, a
forward pass that records what the backward pass needs, and exact
reverse-mode gradients with respect to both parameters and inputs. The
optimizers, soft target updates and the preconditioned Langevin noise all
work on these parameter lists.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1
HIDDEN_UNITS = 128
OUTPUT_ACTIVATIONS = ("linear", "tanh")

Params = List[np.ndarray]


def flatten(arrays: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate arrays into one flat vector (row-major)."""
    if not arrays:
        return np.zeros(0)
    return np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays])


def unflatten(vector: np.ndarray, like: Sequence[np.ndarray]) -> Params:
    """Split a flat vector into arrays shaped like ``like``."""
    vector = np.asarray(vector, dtype=float)
    total = sum(a.size for a in like)
    if vector.size != total:
        raise ValueError(f"Flat vector has {vector.size} entries, expected {total}")
    out: Params = []
    offset = 0
    for a in like:
        out.append(vector[offset:offset + a.size].reshape(a.shape).copy())
        offset += a.size
    return out


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------

class Mlp:
    """
    Fully connected network with ReLU hidden layers.

    Policies use a tanh output mapped onto [low, high] per dimension;
    critics use a linear output. Weights are stored as (fan_in, fan_out)
    so a batch ``x`` of shape (n, fan_in) maps to ``x @ W + b``.
    """

    def __init__(self,
                 sizes: Sequence[int],
                 output_activation: str = "linear",
                 low: Optional[Sequence[float]] = None,
                 high: Optional[Sequence[float]] = None,
                 final_scale: float = 1.0,
                 rng: Optional[np.random.Generator] = None):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ValueError(f"Layer sizes must be at least two positive integers, got {sizes}")
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"output_activation must be one of {OUTPUT_ACTIVATIONS}")
        if (low is None) != (high is None):
            raise ValueError("low and high must be given together")

        self.sizes = sizes
        self.output_activation = output_activation
        self.low = None if low is None else np.asarray(low, dtype=float).reshape(sizes[-1])
        self.high = None if high is None else np.asarray(high, dtype=float).reshape(sizes[-1])
        if self.low is not None and np.any(self.high <= self.low):
            raise ValueError("high must exceed low in every output dimension")

        rng = rng if rng is not None else np.random.default_rng()
        self.params: Params = []
        for index, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / math.sqrt(fan_in)
            weight = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            bias = rng.uniform(-bound, bound, size=fan_out)
            if index == len(sizes) - 2:
                weight *= final_scale
                bias *= final_scale
            self.params.extend([weight, bias])

    @classmethod
    def policy(cls, obs_dim: int, action_dim: int, low: Sequence[float], high: Sequence[float],
               hidden: int = HIDDEN_UNITS, rng: Optional[np.random.Generator] = None) -> "Mlp":
        """[obs, 128, 128, action] with bounded tanh output and a small final layer."""
        return cls([obs_dim, hidden, hidden, action_dim], "tanh", low, high,
                   final_scale=1e-3, rng=rng)

    @classmethod
    def critic(cls, obs_dim: int, action_dim: int, hidden: int = HIDDEN_UNITS,
               rng: Optional[np.random.Generator] = None) -> "Mlp":
        """[obs + action, 128, 128, 1] with linear output."""
        return cls([obs_dim + action_dim, hidden, hidden, 1], "linear", rng=rng)

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def _check_input(self, x: np.ndarray) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        batch = x.reshape(1, -1) if single else x
        if batch.ndim != 2 or batch.shape[1] != self.sizes[0]:
            raise ValueError(f"Input must have {self.sizes[0]} features, got shape {x.shape}")
        return batch, single

    def _output(self, z: np.ndarray) -> np.ndarray:
        if self.output_activation == "linear":
            return z
        squashed = np.tanh(z)
        if self.low is None:
            return squashed
        return self.low + (squashed + 1.0) * 0.5 * (self.high - self.low)

    def forward_with_cache(self, x: np.ndarray) -> Tuple[np.ndarray, Dict[str, Any]]:
        batch, single = self._check_input(x)
        activations = [batch]
        pre_activations = []
        h = batch
        for layer in range(self.n_layers):
            weight, bias = self.params[2 * layer], self.params[2 * layer + 1]
            z = h @ weight + bias
            pre_activations.append(z)
            h = np.maximum(z, 0.0) if layer < self.n_layers - 1 else self._output(z)
            activations.append(h)
        out = activations[-1]
        cache = {"activations": activations, "pre": pre_activations, "single": single}
        return (out[0] if single else out), cache

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on one input vector or a batch (rows are independent)."""
        return self.forward_with_cache(x)[0]

    __call__ = forward

    def backward(self, cache: Mapping[str, Any], grad_out: np.ndarray) -> Tuple[Params, np.ndarray]:
        """
        Reverse-mode pass for a recorded forward call.

        ``grad_out`` is dLoss/dOutput with the output's shape. Returns the
        parameter gradients (summed over the batch) and dLoss/dInput.
        """
        activations = cache["activations"]
        pre = cache["pre"]
        grad = np.asarray(grad_out, dtype=float).reshape(activations[-1].shape)

        z_last = pre[-1]
        if self.output_activation == "tanh":
            squashed = np.tanh(z_last)
            scale = 1.0 if self.low is None else 0.5 * (self.high - self.low)
            grad = grad * (1.0 - squashed ** 2) * scale

        grads: Params = [np.zeros_like(p) for p in self.params]
        for layer in reversed(range(self.n_layers)):
            weight = self.params[2 * layer]
            grads[2 * layer] = activations[layer].T @ grad
            grads[2 * layer + 1] = grad.sum(axis=0)
            grad = grad @ weight.T
            if layer > 0:
                grad = grad * (pre[layer - 1] > 0.0)

        grad_input = grad[0] if cache["single"] else grad
        return grads, grad_input

    def get_flat(self) -> np.ndarray:
        return flatten(self.params)

    def set_flat(self, vector: np.ndarray) -> None:
        self.params = unflatten(vector, self.params)

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.sizes = list(self.sizes)
        clone.output_activation = self.output_activation
        clone.low = None if self.low is None else self.low.copy()
        clone.high = None if self.high is None else self.high.copy()
        clone.params = [p.copy() for p in self.params]
        return clone

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params)

    # -----------------------------
    # Serialization
    # -----------------------------

    def to_arrays(self, prefix: str) -> Dict[str, np.ndarray]:
        arrays = {
            f"{prefix}/sizes": np.asarray(self.sizes, dtype=np.int64),
            f"{prefix}/output_activation": np.asarray(self.output_activation),
        }
        if self.low is not None:
            arrays[f"{prefix}/low"] = self.low
            arrays[f"{prefix}/high"] = self.high
        for index, param in enumerate(self.params):
            arrays[f"{prefix}/param_{index}"] = param
        return arrays

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray], prefix: str) -> "Mlp":
        net = cls.__new__(cls)
        net.sizes = [int(s) for s in arrays[f"{prefix}/sizes"]]
        net.output_activation = str(arrays[f"{prefix}/output_activation"])
        net.low = np.array(arrays[f"{prefix}/low"]) if f"{prefix}/low" in arrays else None
        net.high = np.array(arrays[f"{prefix}/high"]) if f"{prefix}/high" in arrays else None
        net.params = [np.array(arrays[f"{prefix}/param_{i}"]) for i in range(2 * (len(net.sizes) - 1))]
        return net


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

class AdamOptimizer:
    """Adam with L2 weight decay added to the gradient."""

    def __init__(self,
                 params: Sequence[np.ndarray],
                 lr: float = 1e-3,
                 beta1: float = 0.9,
                 beta2: float = 0.999,
                 eps: float = 1e-8,
                 weight_decay: float = 5e-4):
        if lr <= 0:
            raise ValueError(f"Learning rate must be positive, got {lr}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.steps = 0

    def step(self, params: Params, grads: Sequence[np.ndarray]) -> None:
        """Update ``params`` in place."""
        if len(grads) != len(params):
            raise ValueError("One gradient per parameter array is required")
        self.steps += 1
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps
        for i, (param, grad) in enumerate(zip(params, grads)):
            g = grad + self.weight_decay * param
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / correction1
            v_hat = self.v[i] / correction2
            param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> Dict[str, Any]:
        return {"kind": "adam", "lr": self.lr, "steps": self.steps,
                "m": [a.copy() for a in self.m], "v": [a.copy() for a in self.v]}


class MomentumOptimizer:
    """Heavy-ball SGD with weight decay: v ← μv + g, θ ← θ - ηv."""

    def __init__(self,
                 params: Sequence[np.ndarray],
                 lr: float = 0.01,
                 momentum: float = 0.9,
                 weight_decay: float = 5e-4):
        if lr <= 0:
            raise ValueError(f"Learning rate must be positive, got {lr}")
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"Momentum must lie in [0, 1), got {momentum}")
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p) for p in params]
        self.steps = 0

    def step(self, params: Params, grads: Sequence[np.ndarray]) -> None:
        if len(grads) != len(params):
            raise ValueError("One gradient per parameter array is required")
        self.steps += 1
        for i, (param, grad) in enumerate(zip(params, grads)):
            g = grad + self.weight_decay * param
            self.velocity[i] = self.momentum * self.velocity[i] + g
            param -= self.lr * self.velocity[i]

    def state_dict(self) -> Dict[str, Any]:
        return {"kind": "momentum", "lr": self.lr, "steps": self.steps,
                "velocity": [a.copy() for a in self.velocity]}


# ---------------------------------------------------------------------------
# Langevin noise
# ---------------------------------------------------------------------------

@dataclass
class SgldNoiseState:
    """
    Running mean and diagonal covariance of a gradient stream.

    ``covariance`` is kept clamped at zero entrywise.
    """

    dim: int
    rho: float = 0.99
    psi: float = 0.1
    mean: np.ndarray = field(default=None)
    covariance: np.ndarray = field(default=None)
    steps: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if self.psi < 0.0:
            raise ValueError(f"psi must be non-negative, got {self.psi}")
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.covariance is None:
            self.covariance = np.zeros(self.dim)


def sgld_perturb(grad: np.ndarray, state: SgldNoiseState, rng: np.random.Generator) -> np.ndarray:
    """
    Preconditioned Langevin perturbation of a flat gradient.

    μ_t = ρμ_{t-1} + (1-ρ)g, C_t = ρC_{t-1} + (1-ρ)(g-μ_t)(g-μ_{t-1}) clamped
    at 0, and the result is g + ψζ with ζ ~ Normal(μ_t, diag C_t).
    """
    grad = np.asarray(grad, dtype=float)
    if grad.shape != (state.dim,):
        raise ValueError(f"Gradient must have {state.dim} entries, got {grad.shape}")
    previous_mean = state.mean
    state.mean = state.rho * previous_mean + (1.0 - state.rho) * grad
    state.covariance = np.maximum(
        state.rho * state.covariance
        + (1.0 - state.rho) * (grad - state.mean) * (grad - previous_mean),
        0.0,
    )
    state.steps += 1
    zeta = state.mean + np.sqrt(state.covariance) * rng.standard_normal(state.dim)
    return grad + state.psi * zeta


# ---------------------------------------------------------------------------
# Target networks and statistics
# ---------------------------------------------------------------------------

def soft_update(target: Union[Mlp, Params], online: Union[Mlp, Params], rate: float) -> None:
    """
    Polyak update in place: target ← (1-rate)·target + rate·online.

    ``rate`` is the fraction contributed by the online network.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"Soft update rate must lie in [0, 1], got {rate}")
    target_params = target.params if isinstance(target, Mlp) else target
    online_params = online.params if isinstance(online, Mlp) else online
    if len(target_params) != len(online_params) or any(
            t.shape != o.shape for t, o in zip(target_params, online_params)):
        raise ValueError("Target and online parameters must have matching shapes")
    for t, o in zip(target_params, online_params):
        t *= (1.0 - rate)
        t += rate * o


def hard_update(target: Mlp, online: Mlp) -> None:
    soft_update(target, online, 1.0)


class RunningMeanStd:
    """Streaming per-feature mean and variance (parallel Welford merge)."""

    def __init__(self, dim: int, min_std: float = 1e-6):
        self.dim = dim
        self.min_std = min_std
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def update(self, batch: np.ndarray) -> None:
        batch = np.atleast_2d(np.asarray(batch, dtype=float))
        if batch.shape[1] != self.dim:
            raise ValueError(f"Expected {self.dim} features, got {batch.shape[1]}")
        n = batch.shape[0]
        if n == 0:
            return
        batch_mean = batch.mean(axis=0)
        batch_m2 = ((batch - batch_mean) ** 2).sum(axis=0)
        total = self.count + n
        delta = batch_mean - self.mean
        self.mean = self.mean + delta * n / total
        self.m2 = self.m2 + batch_m2 + delta ** 2 * self.count * n / total
        self.count = total

    @property
    def var(self) -> np.ndarray:
        if self.count < 2:
            return np.ones(self.dim)
        return self.m2 / (self.count - 1)

    @property
    def std(self) -> np.ndarray:
        return np.maximum(np.sqrt(self.var), self.min_std)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_networks(path: Union[str, Path],
                  networks: Mapping[str, Mlp],
                  metadata: Optional[Mapping[str, Any]] = None,
                  extra_arrays: Optional[Mapping[str, np.ndarray]] = None) -> Path:
    """
    Write networks to a versioned ``.npz`` checkpoint.

    Each network is stored under its name as sizes, output activation,
    optional bounds and row-major parameter blocks.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: Dict[str, np.ndarray] = {
        "format_version": np.asarray(CHECKPOINT_FORMAT_VERSION),
        "names": np.asarray(sorted(networks)),
        "metadata": np.asarray(json.dumps(dict(metadata or {}), sort_keys=True)),
    }
    for name, net in networks.items():
        arrays.update(net.to_arrays(name))
    for name, values in (extra_arrays or {}).items():
        arrays[f"extra/{name}"] = np.asarray(values)
    np.savez(path, **arrays)
    logger.info(f"Saved checkpoint {path} ({', '.join(sorted(networks))})")
    return path


def load_networks(path: Union[str, Path]) -> Tuple[Dict[str, Mlp], Dict[str, Any], Dict[str, np.ndarray]]:
    """Read a checkpoint written by :func:`save_networks`."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        arrays = {key: data[key] for key in data.files}
    version = int(arrays["format_version"])
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"Unsupported checkpoint format version {version}")
    networks = {str(name): Mlp.from_arrays(arrays, str(name)) for name in arrays["names"]}
    metadata = json.loads(str(arrays["metadata"]))
    extra = {key[len("extra/"):]: value for key, value in arrays.items() if key.startswith("extra/")}
    return networks, metadata, extra


__all__ = [
    "CHECKPOINT_FORMAT_VERSION",
    "HIDDEN_UNITS",
    "Mlp",
    "AdamOptimizer",
    "MomentumOptimizer",
    "SgldNoiseState",
    "sgld_perturb",
    "soft_update",
    "hard_update",
    "RunningMeanStd",
    "flatten",
    "unflatten",
    "save_networks",
    "load_networks",
]
