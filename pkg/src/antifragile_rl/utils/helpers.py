"""
Helper functions shared by the simulator, trainers and harness.
"""

import hashlib
import json
import zlib
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, None]


def as_vec3(value: Any, name: str = "vector") -> np.ndarray:
    """
    Convert a 3-component value to a float array.

    Args:
        value: Sequence or array with three finite components
        name: Field name used in error messages

    Returns:
        New float64 array of shape (3,)
    """
    vec = np.array(value, dtype=float).reshape(-1)
    if vec.shape != (3,):
        raise ValueError(f"{name} must have exactly 3 components, got {vec.shape[0]}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} must be finite, got {vec.tolist()}")
    return vec


def signum(values: np.ndarray) -> np.ndarray:
    """
    Sign map with sign(0) = 0.

    Args:
        values: Array of gradients

    Returns:
        Array of -1.0, 0.0 and 1.0
    """
    return np.sign(values).astype(float)


def label_key(label: str) -> int:
    """
    Stable non-negative integer for a text label.

    Args:
        label: Stream or cell name

    Returns:
        CRC32 of the UTF-8 label
    """
    return zlib.crc32(label.encode("utf-8"))


def seed_sequence(master_seed: SeedLike, *keys: Union[int, str]) -> np.random.SeedSequence:
    """
    Derive a seed sequence for one cell of an experiment grid.

    The master seed is the entropy and the keys form the spawn key, so every
    (master, keys) pair owns its own stream and adding cells never perturbs
    the streams of existing ones.

    Args:
        master_seed: Master seed or an existing SeedSequence
        *keys: Integers or labels identifying the cell

    Returns:
        SeedSequence for the cell
    """
    spawn_key = tuple(k if isinstance(k, int) else label_key(k) for k in keys)
    if isinstance(master_seed, np.random.SeedSequence):
        return np.random.SeedSequence(master_seed.entropy,
                                      spawn_key=master_seed.spawn_key + spawn_key)
    if master_seed is None:
        master_seed = 0
    if int(master_seed) < 0:
        raise ValueError(f"Seed must be non-negative, got {master_seed}")
    return np.random.SeedSequence(int(master_seed), spawn_key=spawn_key)


def spawn_generators(seed: SeedLike, names: Sequence[str]) -> Dict[str, np.random.Generator]:
    """
    Split one seed into independent named generators.

    Args:
        seed: Integer seed or SeedSequence
        names: Stream names; new names must be appended, never inserted

    Returns:
        Mapping of stream name to Generator
    """
    base = seed if isinstance(seed, np.random.SeedSequence) else seed_sequence(seed)
    children = base.spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


def to_builtin(value: Any) -> Any:
    """
    Recursively convert numpy containers and scalars to JSON-friendly values.

    Args:
        value: Nested structure

    Returns:
        Same structure made of lists, dicts, floats, ints, strings
    """
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Mapping):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    return value


def canonical_json(value: Any) -> str:
    """Serialize with sorted keys and fixed separators."""
    return json.dumps(to_builtin(value), sort_keys=True, separators=(",", ":"))


def config_hash(value: Any) -> str:
    """
    SHA-256 of the canonical JSON form of a configuration.

    Args:
        value: Resolved configuration (dict or dataclass-derived dict)

    Returns:
        Hex digest
    """
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """
    Merge nested dictionaries, values from ``override`` winning.

    Args:
        base: Lower-priority mapping
        override: Higher-priority mapping

    Returns:
        New merged dictionary
    """
    merged: Dict[str, Any] = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def spearman_trend(values: Iterable[float]) -> float:
    """
    Spearman rank correlation of a sequence against its index.

    Args:
        values: Ordered measurements (e.g. shift per epsilon level)

    Returns:
        Correlation in [-1, 1]; 0.0 for constant input
    """
    from scipy.stats import spearmanr

    series = np.asarray(list(values), dtype=float)
    if series.size < 2 or np.all(series == series[0]):
        return 0.0
    rho = spearmanr(np.arange(series.size), series)[0]
    return float(rho)


def format_alpha(alpha: float) -> str:
    """File-name friendly alpha label, e.g. ``alpha_0.30``."""
    return f"alpha_{alpha:.2f}"


def chunked(items: Sequence[Any], size: int) -> List[Sequence[Any]]:
    """Split a sequence into consecutive chunks of ``size`` (last one may be short)."""
    if size <= 0:
        raise ValueError("Chunk size must be positive")
    return [items[i:i + size] for i in range(0, len(items), size)]


def optional_array(value: Optional[Sequence[float]]) -> Optional[np.ndarray]:
    """Float array copy of ``value`` or None."""
    if value is None:
        return None
    return np.array(value, dtype=float)
