"""
Utility functions for antifragile_rl.
"""

from .helpers import (
    as_vec3,
    signum,
    label_key,
    seed_sequence,
    spawn_generators,
    to_builtin,
    canonical_json,
    config_hash,
    deep_merge,
    spearman_trend,
    format_alpha,
    chunked,
    optional_array
)
from .validation import (
    require_positive,
    require_non_negative,
    require_probability,
    require_int,
    validate_mapping,
    collect_errors,
    raise_for_errors,
    check_field
)

__all__ = [
    'as_vec3',
    'signum',
    'label_key',
    'seed_sequence',
    'spawn_generators',
    'to_builtin',
    'canonical_json',
    'config_hash',
    'deep_merge',
    'spearman_trend',
    'format_alpha',
    'chunked',
    'optional_array',
    'require_positive',
    'require_non_negative',
    'require_probability',
    'require_int',
    'validate_mapping',
    'collect_errors',
    'raise_for_errors',
    'check_field'
]
