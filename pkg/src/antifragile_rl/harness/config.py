"""
Experiment configuration.

A configuration is resolved in three layers: a built-in profile
(``fast`` or ``paper``), an optional user JSON file, and command-line
overrides. Every field problem is collected and reported together as a
:class:`~antifragile_rl.exceptions.ConfigError`.
"""

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from ..attacks import ATTACK_KINDS, AttackConfig
from ..bandit.samplers import SAMPLER_KINDS, DtsConfig
from ..environment import EpisodeConfig, load_scenario
from ..exceptions import ConfigError
from ..robust_rl.trainers import TRAINER_KINDS, TrainingConfig
from ..shift import DEFAULT_K_MULT, REFERENCES
from ..utils.helpers import config_hash, deep_merge
from ..utils.validation import (
    check_field,
    collect_errors,
    raise_for_errors,
    require_int,
    require_non_negative,
    require_probability,
    validate_mapping,
)

logger = logging.getLogger(__name__)

PROFILES = ("fast", "paper")
DEFAULT_PROFILE = "paper"
DEFAULT_EPSILONS = (0.5, 1.0, 1.5, 2.0, 2.5)
BASELINE_KINDS = tuple(k for k in TRAINER_KINDS if k not in ("vanilla", "action_robust"))

# "profile" is read back from saved configurations but the argument wins
_TOP_LEVEL = ("name", "profile", "seed", "n_seeds", "workers", "output_dir", "scenario",
              "eval_scenario", "environment", "training", "attack", "epsilons", "shift", "bandit",
              "evaluation")
_ATTACK_KEYS = ("kind", "n_steps", "fw_c", "random_start", "spoof_low", "spoof_high")


@dataclass(frozen=True)
class ShiftSettings:
    k_mult: float = DEFAULT_K_MULT
    probe_states: int = 512
    reference: str = "own"


@dataclass(frozen=True)
class BanditSettings:
    samplers: Tuple[str, ...] = SAMPLER_KINDS
    discount: float = 0.8
    a0: float = 1.0
    b0: float = 1.0
    eps_greedy: float = 0.1
    runs: int = 100
    steps: int = 4000
    schedule: Optional[str] = None
    window: int = 32
    per_episode: bool = False

    def dts_config(self, n_arms: int) -> DtsConfig:
        return DtsConfig(self.discount, n_arms, self.a0, self.b0)


@dataclass(frozen=True)
class EvaluationSettings:
    episodes: int = 100
    epsilon: float = 2.5
    baselines: Tuple[str, ...] = BASELINE_KINDS
    baseline_alpha: float = 0.1
    attack_kind: str = "pgd"


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment configuration."""

    name: str = "experiment"
    profile: str = DEFAULT_PROFILE
    seed: int = 0
    n_seeds: int = 1
    workers: int = 1
    output_dir: str = "runs"
    scenario: str = "training"
    eval_scenario: str = "testing"
    environment: Dict[str, Any] = field(default_factory=dict)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    epsilons: Tuple[float, ...] = DEFAULT_EPSILONS
    shift: ShiftSettings = field(default_factory=ShiftSettings)
    bandit: BanditSettings = field(default_factory=BanditSettings)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    def attack_at(self, epsilon: float) -> AttackConfig:
        return self.attack.with_epsilon(epsilon)

    def evaluation_attack(self) -> AttackConfig:
        """Attack used by the evaluate stage (kind and strength from ``evaluation``)."""
        return replace(self.attack, kind=self.evaluation.attack_kind, epsilon=self.evaluation.epsilon)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["training"] = self.training.to_dict()
        out["attack"] = {k: v for k, v in self.attack.to_dict().items() if k in _ATTACK_KEYS}
        out["epsilons"] = list(self.epsilons)
        out["bandit"]["samplers"] = list(self.bandit.samplers)
        out["evaluation"]["baselines"] = list(self.evaluation.baselines)
        return out

    def config_hash(self) -> str:
        return config_hash(self.to_dict())

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
        return path


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def load_profile(name: str) -> Dict[str, Any]:
    if name not in PROFILES:
        raise ConfigError([f"profile: unknown profile {name!r}; expected one of {list(PROFILES)}"])
    resource = resources.files("antifragile_rl") / "data" / "profiles" / f"{name}.json"
    return json.loads(resource.read_text(encoding="utf-8"))


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config: file not found: {path}"])
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: {path} is not valid JSON ({exc})"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([f"config: {path} must contain a JSON object"])
    return raw


def _build_section(errors: List[str], section: str, factory, raw: Mapping[str, Any]):
    try:
        return factory(**dict(raw))
    except (TypeError, ValueError) as exc:
        errors.append(f"{section}: {exc}")
        return None


def _check_choices(errors: List[str], section: str, values, allowed) -> None:
    bad = [v for v in values if v not in allowed]
    if bad:
        errors.append(f"{section}: unknown value(s) {bad}; expected from {list(allowed)}")


def _check_scenario(errors: List[str], section: str, source: Any) -> None:
    try:
        load_scenario(source)
    except (FileNotFoundError, ValueError, TypeError) as exc:
        errors.append(f"{section}: {exc}")


def parse_config(raw: Mapping[str, Any], profile: str = DEFAULT_PROFILE) -> ExperimentConfig:
    """
    Validate a merged configuration mapping and build the dataclasses.

    Raises:
        ConfigError: listing every invalid field
    """
    checks = [
        validate_mapping(raw, _TOP_LEVEL, "config"),
        validate_mapping(raw.get("attack", {}), _ATTACK_KEYS, "attack"),
        validate_mapping(raw.get("shift", {}), ShiftSettings.__dataclass_fields__, "shift"),
        validate_mapping(raw.get("bandit", {}), BanditSettings.__dataclass_fields__, "bandit"),
        validate_mapping(raw.get("evaluation", {}), EvaluationSettings.__dataclass_fields__,
                         "evaluation"),
        validate_mapping(raw.get("environment", {}), EpisodeConfig.__dataclass_fields__,
                         "environment"),
    ]
    errors = collect_errors(checks)
    raise_for_errors(errors)

    seed = check_field(errors, "config", "seed", lambda n, v: require_int(n, v, minimum=0),
                       raw.get("seed", 0))
    n_seeds = check_field(errors, "config", "n_seeds", require_int, raw.get("n_seeds", 1))
    workers = check_field(errors, "config", "workers", require_int, raw.get("workers", 1))

    training = None
    try:
        training = TrainingConfig.from_dict(raw.get("training", {}))
    except (TypeError, ValueError) as exc:
        errors.append(f"training: {exc}")

    attack_raw = dict(raw.get("attack", {}))
    attack = _build_section(errors, "attack", AttackConfig, attack_raw)

    try:
        epsilons = tuple(float(e) for e in raw.get("epsilons", DEFAULT_EPSILONS))
    except (TypeError, ValueError):
        errors.append("epsilons: expected a list of numbers")
        epsilons = DEFAULT_EPSILONS
    if not epsilons:
        errors.append("epsilons: the attack-strength schedule must not be empty")
    for eps in epsilons:
        check_field(errors, "epsilons", "value", require_non_negative, eps)

    shift_raw = dict(raw.get("shift", {}))
    shift = _build_section(errors, "shift", ShiftSettings, shift_raw)
    if shift is not None:
        check_field(errors, "shift", "k_mult", require_probability, shift.k_mult)
        check_field(errors, "shift", "probe_states", require_int, shift.probe_states)
        _check_choices(errors, "shift.reference", [shift.reference], REFERENCES)

    bandit_raw = dict(raw.get("bandit", {}))
    if "samplers" in bandit_raw:
        bandit_raw["samplers"] = tuple(bandit_raw["samplers"])
    bandit = _build_section(errors, "bandit", BanditSettings, bandit_raw)
    if bandit is not None:
        _check_choices(errors, "bandit.samplers", bandit.samplers, SAMPLER_KINDS)
        _build_section(errors, "bandit", DtsConfig,
                       {"discount": bandit.discount, "a0": bandit.a0, "b0": bandit.b0})
        check_field(errors, "bandit", "eps_greedy", require_probability, bandit.eps_greedy)
        check_field(errors, "bandit", "runs", require_int, bandit.runs)
        check_field(errors, "bandit", "steps", require_int, bandit.steps)
        check_field(errors, "bandit", "window", require_int, bandit.window)
        if bandit.schedule is not None and not Path(bandit.schedule).exists():
            errors.append(f"bandit.schedule: file not found: {bandit.schedule}")

    evaluation_raw = dict(raw.get("evaluation", {}))
    if "baselines" in evaluation_raw:
        evaluation_raw["baselines"] = tuple(evaluation_raw["baselines"])
    evaluation = _build_section(errors, "evaluation", EvaluationSettings, evaluation_raw)
    if evaluation is not None:
        check_field(errors, "evaluation", "episodes", require_int, evaluation.episodes)
        check_field(errors, "evaluation", "epsilon", require_non_negative, evaluation.epsilon)
        check_field(errors, "evaluation", "baseline_alpha", require_probability,
                    evaluation.baseline_alpha)
        _check_choices(errors, "evaluation.baselines", evaluation.baselines, BASELINE_KINDS)
        _check_choices(errors, "evaluation.attack_kind", [evaluation.attack_kind], ATTACK_KINDS)

    environment = dict(raw.get("environment", {}))
    _build_section(errors, "environment", EpisodeConfig, environment)

    scenario = raw.get("scenario", "training")
    eval_scenario = raw.get("eval_scenario", "testing")
    _check_scenario(errors, "scenario", scenario)
    _check_scenario(errors, "eval_scenario", eval_scenario)

    raise_for_errors(errors)
    return ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        profile=profile,
        seed=seed,
        n_seeds=n_seeds,
        workers=workers,
        output_dir=str(raw.get("output_dir", "runs")),
        scenario=str(scenario),
        eval_scenario=str(eval_scenario),
        environment=environment,
        training=training,
        attack=attack,
        epsilons=epsilons,
        shift=shift,
        bandit=bandit,
        evaluation=evaluation,
    )


def load_config(path: Optional[Union[str, Path]] = None,
                profile: str = DEFAULT_PROFILE,
                overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """
    Resolve profile defaults, the user file and overrides, in that order.

    Args:
        path: Optional user JSON configuration
        profile: Built-in profile name
        overrides: Highest-priority values (``seed``, ``output_dir`` from the CLI)

    Returns:
        Validated ExperimentConfig
    """
    merged = load_profile(profile)
    if path is not None:
        merged = deep_merge(merged, read_config_file(path))
    if overrides:
        merged = deep_merge(merged, {k: v for k, v in overrides.items() if v is not None})
    config = parse_config(merged, profile)
    logger.debug(f"Resolved configuration {config.name!r} ({profile}), hash {config.config_hash()[:12]}")
    return config


__all__ = [
    "PROFILES",
    "DEFAULT_PROFILE",
    "DEFAULT_EPSILONS",
    "BASELINE_KINDS",
    "ShiftSettings",
    "BanditSettings",
    "EvaluationSettings",
    "ExperimentConfig",
    "load_profile",
    "read_config_file",
    "parse_config",
    "load_config",
]
