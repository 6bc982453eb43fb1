"""
Exception types raised across antifragile_rl.

Plain argument problems raise ``ValueError`` directly; the classes below mark
conditions a caller (usually the CLI) has to tell apart.
"""

from typing import List, Optional


class DegenerateGeometryError(ValueError):
    """Raised when a flow-field quantity is undefined (zero radial normal, obstacle on the goal)."""


class StartPositionError(RuntimeError):
    """Raised when no valid start position is found within the retry budget."""


class EpisodeFinishedError(RuntimeError):
    """Raised when stepping an environment whose episode is already done."""


class TrainingDivergedError(RuntimeError):
    """Raised when a loss or a parameter becomes non-finite during training."""

    def __init__(self, message: str,
                 episode: Optional[int] = None,
                 step: Optional[int] = None,
                 alpha: Optional[float] = None):
        details = []
        if episode is not None:
            details.append(f"episode={episode}")
        if step is not None:
            details.append(f"step={step}")
        if alpha is not None:
            details.append(f"alpha={alpha:g}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.episode = episode
        self.step = step
        self.alpha = alpha


class EnsembleEmptyError(RuntimeError):
    """Raised when the first ensemble candidate already fails the entropy-gap test."""


class ConfigError(ValueError):
    """Raised for invalid experiment configuration; carries one line per bad field."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("Invalid configuration:\n  " + "\n  ".join(self.errors))


class CheckpointMissingError(FileNotFoundError):
    """Raised when a stage needs a checkpoint that was never written."""


class CalibrationMissingError(FileNotFoundError):
    """Raised when switching is requested without calibrated shift reports."""


__all__ = [
    "DegenerateGeometryError",
    "StartPositionError",
    "EpisodeFinishedError",
    "TrainingDivergedError",
    "EnsembleEmptyError",
    "ConfigError",
    "CheckpointMissingError",
    "CalibrationMissingError",
]
