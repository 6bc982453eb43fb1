"""
Output files: CSV tables with metadata sidecars, checkpoints and
calibration reports laid out under one run directory.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from .. import __version__
from ..exceptions import CalibrationMissingError, CheckpointMissingError
from ..shift import ShiftReport
from ..utils.helpers import to_builtin

logger = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".meta.json"


def build_id() -> str:
    return f"antifragile-rl {__version__}"


def sidecar_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.name + SIDECAR_SUFFIX)


def write_table(frame: pd.DataFrame,
                path: Union[str, Path],
                config_hash: str,
                seed: Optional[int],
                command: str,
                extra: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write ``frame`` as CSV with a header row and a ``.meta.json`` sidecar.

    The sidecar holds the config hash, seed, build id, producing command and
    the column list. Nothing time-dependent is written, so reruns are
    byte-identical.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    meta = {
        "config_hash": config_hash,
        "seed": seed,
        "build_id": build_id(),
        "command": command,
        "columns": list(frame.columns),
        "rows": int(len(frame)),
    }
    if extra:
        meta.update(to_builtin(extra))
    with open(sidecar_path(path), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def read_table(path: Union[str, Path]) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """CSV table and its sidecar metadata (empty dict when the sidecar is missing)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Table not found: {path}")
    frame = pd.read_csv(path)
    meta_path = sidecar_path(path)
    meta: Dict[str, Any] = {}
    if meta_path.exists():
        with open(meta_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
    return frame, meta


# ---------------------------------------------------------------------------
# Run directory layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunLayout:
    """
    Paths under one output directory::

        <root>/seed_<s>/ensemble/            alpha_X.npz + ensemble.json
        <root>/seed_<s>/baselines/<kind>.npz
        <root>/seed_<s>/calibration.json
        <root>/<table>.csv (+ .meta.json)
    """

    root: Path

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))

    def seed_dir(self, seed: int) -> Path:
        return self.root / f"seed_{seed}"

    def ensemble_dir(self, seed: int) -> Path:
        return self.seed_dir(seed) / "ensemble"

    def member_checkpoint(self, seed: int, name: str) -> Path:
        return self.ensemble_dir(seed) / f"{name}.npz"

    def baseline_checkpoint(self, seed: int, kind: str) -> Path:
        return self.seed_dir(seed) / "baselines" / f"{kind}.npz"

    def calibration_file(self, seed: int) -> Path:
        return self.seed_dir(seed) / "calibration.json"

    def table(self, name: str) -> Path:
        return self.root / f"{name}.csv"


def require_checkpoint(path: Union[str, Path]) -> Path:
    path = Path(path)
    if not path.exists():
        raise CheckpointMissingError(f"Checkpoint not found: {path}; run train-ensemble first")
    return path


def save_calibration(reports: Sequence[ShiftReport], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"reports": [r.to_dict() for r in reports]}, f, indent=2)
    return path


def load_calibration(path: Union[str, Path]) -> List[ShiftReport]:
    path = Path(path)
    if not path.exists():
        raise CalibrationMissingError(f"Calibration not found: {path}; run calibrate first")
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    return [ShiftReport.from_dict(r) for r in raw["reports"]]


__all__ = [
    "SIDECAR_SUFFIX",
    "build_id",
    "sidecar_path",
    "write_table",
    "read_table",
    "RunLayout",
    "require_checkpoint",
    "save_calibration",
    "load_calibration",
]
