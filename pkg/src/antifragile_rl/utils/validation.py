"""
Validation utilities for configuration dictionaries and numeric fields.
"""

import math
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from ..exceptions import ConfigError


def require_positive(name: str, value: float) -> float:
    """
    Check a strictly positive finite number.

    Args:
        name: Field name for the message
        value: Number to check

    Returns:
        The value as float
    """
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be a positive number, got {value}")
    return value


def require_non_negative(name: str, value: float) -> float:
    """Check a finite number >= 0 and return it as float."""
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise ValueError(f"{name} must be non-negative, got {value}")
    return value


def require_probability(name: str, value: float) -> float:
    """Check a number in [0, 1] and return it as float."""
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def require_int(name: str, value: Any, minimum: int = 1) -> int:
    """Check an integer >= ``minimum`` and return it."""
    if isinstance(value, bool) or int(value) != value:
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def validate_mapping(raw: Mapping[str, Any],
                     allowed: Iterable[str],
                     section: str = "config") -> Dict[str, Any]:
    """
    Check a configuration section for unknown keys and wrong types.

    Args:
        raw: Section read from a JSON file
        allowed: Accepted key names
        section: Section path used in messages

    Returns:
        Dictionary with validation results
    """
    results: Dict[str, Any] = {
        'is_valid': True,
        'errors': [],
        'warnings': [],
    }
    if not isinstance(raw, Mapping):
        results['is_valid'] = False
        results['errors'].append(f"{section}: expected an object, got {type(raw).__name__}")
        return results

    allowed = set(allowed)
    unknown = sorted(set(raw) - allowed)
    if unknown:
        results['is_valid'] = False
        results['errors'].append(f"{section}: unknown field(s) {unknown}")
    return results


def collect_errors(checks: Sequence[Dict[str, Any]]) -> List[str]:
    """Flatten the error lists of several validation results."""
    errors: List[str] = []
    for result in checks:
        errors.extend(result.get('errors', []))
    return errors


def raise_for_errors(errors: Sequence[str]) -> None:
    """Raise ConfigError when any field diagnostic was collected."""
    if errors:
        raise ConfigError(list(errors))


def check_field(errors: List[str], section: str, name: str, check, value: Any) -> Optional[Any]:
    """
    Run one field check and record its message instead of raising.

    Args:
        errors: List collecting diagnostics
        section: Section path, e.g. ``training``
        name: Field name
        check: Callable ``(name, value) -> value`` raising ValueError
        value: Raw value

    Returns:
        Checked value, or None when the check failed
    """
    try:
        return check(f"{section}.{name}", value)
    except (TypeError, ValueError) as exc:
        errors.append(str(exc))
        return None
