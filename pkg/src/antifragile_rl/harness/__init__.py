"""
Experiment harness: configuration, evaluation metrics and output files.

The stage recipes live in :mod:`antifragile_rl.harness.experiments`.
"""

from .metrics import (
    EVAL_EPISODES,
    METRIC_COLUMNS,
    EvalMetrics,
    MetricsRecorder,
    make_attacker,
    evaluate_policy
)
from .persistence import (
    build_id,
    write_table,
    read_table,
    RunLayout,
    require_checkpoint,
    save_calibration,
    load_calibration
)
from .config import (
    PROFILES,
    DEFAULT_PROFILE,
    ShiftSettings,
    BanditSettings,
    EvaluationSettings,
    ExperimentConfig,
    load_profile,
    parse_config,
    load_config
)

__all__ = [
    'EVAL_EPISODES',
    'METRIC_COLUMNS',
    'EvalMetrics',
    'MetricsRecorder',
    'make_attacker',
    'evaluate_policy',
    'build_id',
    'write_table',
    'read_table',
    'RunLayout',
    'require_checkpoint',
    'save_calibration',
    'load_calibration',
    'PROFILES',
    'DEFAULT_PROFILE',
    'ShiftSettings',
    'BanditSettings',
    'EvaluationSettings',
    'ExperimentConfig',
    'load_profile',
    'parse_config',
    'load_config'
]
