"""
Experiment recipes behind the command-line stages.

- ``train-ensemble``: entropy-gap ensemble plus benchmark trainers per seed
- ``calibrate``: value-distribution shifts and Bernoulli parameters per
  attack strength
- ``evaluate``: fixed, benchmark and switched policies under attack
- ``bandit-sim``: sampler regret on synthetic schedules

Every stage is a function of the resolved configuration and its master
seed. Seed cells fan out over a process pool when ``workers > 1``; the
parent process writes every output file.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
import pandas as pd

from ..bandit.deployment import deploy_switching
from ..bandit.samplers import make_sampler
from ..bandit.simulation import RewardSchedule, run_many
from ..environment import UavDeconflictionEnv, make_env
from ..robust_rl.agents import RobustPolicyPair
from ..robust_rl.trainers import (
    EnsembleSet,
    TrainingResult,
    build_ensemble,
    train_adversarial_ddpg,
    train_nr_mdp,
    train_pr_mdp,
)
from ..shift import harvest_probe_states, shift_vector
from ..utils.helpers import format_alpha, seed_sequence, spearman_trend
from .config import ExperimentConfig
from .metrics import evaluate_policy
from .persistence import RunLayout, load_calibration, require_checkpoint, save_calibration, write_table

logger = logging.getLogger(__name__)

_BASELINE_TRAINERS = {
    "nr_mdp": lambda env, cfg, alpha, seed: train_nr_mdp(env, alpha, cfg, seed),
    "pr_mdp": lambda env, cfg, alpha, seed: train_pr_mdp(env, alpha, cfg, seed),
    "adversarial": lambda env, cfg, alpha, seed: train_adversarial_ddpg(env, None, cfg, seed),
}


def env_factory(config: ExperimentConfig, scenario: str) -> Callable[[], UavDeconflictionEnv]:
    def factory() -> UavDeconflictionEnv:
        return make_env(scenario, **config.environment)
    return factory


def cell_seed(config: ExperimentConfig, index: int, *keys: str) -> np.random.SeedSequence:
    """Seed of one (seed index, stage) cell: master seed, then index, then labels."""
    return seed_sequence(config.seed, index, *keys)


def _fan_out(worker: Callable, cells: List[Tuple], workers: int) -> List[Any]:
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, cells))
    return [worker(cell) for cell in cells]


def _history_rows(result: TrainingResult, index: int, accepted: bool) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    history = result.to_frame()
    history.insert(0, "seed", index)
    entropy = {
        "seed": index, "kind": result.kind, "alpha": result.alpha,
        "h_rand": result.entropy.h_rand, "h_opt": result.entropy.h_opt,
        "delta_h": result.entropy.delta_h, "accepted": accepted,
    }
    return history, entropy


# ---------------------------------------------------------------------------
# train-ensemble
# ---------------------------------------------------------------------------

def _train_seed(cell: Tuple[ExperimentConfig, int]) -> Tuple[pd.DataFrame, List[Dict[str, Any]]]:
    config, index = cell
    layout = RunLayout(config.output_path)
    histories: List[pd.DataFrame] = []
    entropy_rows: List[Dict[str, Any]] = []
    make_train_env = env_factory(config, config.scenario)

    def record(result: TrainingResult, accepted: bool) -> None:
        history, entropy = _history_rows(result, index, accepted)
        histories.append(history)
        entropy_rows.append(entropy)

    if (layout.ensemble_dir(index) / "ensemble.json").exists():
        logger.info(f"Seed {index}: ensemble checkpoint found, skipping training")
    else:
        ensemble = build_ensemble(make_train_env, config.training, cell_seed(config, index, "ensemble"),
                                  on_candidate=record)
        ensemble.save(layout.ensemble_dir(index))

    for kind in config.evaluation.baselines:
        path = layout.baseline_checkpoint(index, kind)
        if path.exists():
            logger.info(f"Seed {index}: {kind} checkpoint found, skipping training")
            continue
        trainer = _BASELINE_TRAINERS[kind]
        result = trainer(make_train_env(), config.training, config.evaluation.baseline_alpha,
                         cell_seed(config, index, kind))
        record(result, False)
        result.pair.save(path, {"seed": index})

    frame = pd.concat(histories, ignore_index=True) if histories else pd.DataFrame()
    return frame, entropy_rows


def train_ensemble(config: ExperimentConfig, command: str = "train-ensemble") -> Dict[str, Any]:
    """
    Train the ensemble and the benchmark policies for every seed.

    Seeds whose checkpoints already exist are skipped; their rows are kept
    from the per-seed tables written earlier.
    """
    layout = RunLayout(config.output_path)
    outcomes = _fan_out(_train_seed, [(config, i) for i in range(config.n_seeds)], config.workers)

    digest = config.config_hash()
    for index, (history, entropy_rows) in enumerate(outcomes):
        if history.empty:
            continue
        for name, frame in (("training_rewards.csv", history), ("entropy.csv", pd.DataFrame(entropy_rows))):
            path = layout.seed_dir(index) / name
            if path.exists():
                frame = pd.concat([pd.read_csv(path), frame], ignore_index=True)
            write_table(frame, path, digest, index, command)

    rewards = _gather(layout, "training_rewards.csv", config.n_seeds)
    entropy = _gather(layout, "entropy.csv", config.n_seeds)
    write_table(rewards, layout.table("training_rewards"), digest, config.seed, command)
    write_table(entropy, layout.table("entropy"), digest, config.seed, command)
    return {"seeds": config.n_seeds, "episodes": int(len(rewards))}


def _gather(layout: RunLayout, name: str, n_seeds: int) -> pd.DataFrame:
    frames = []
    for index in range(n_seeds):
        path = layout.seed_dir(index) / name
        if path.exists():
            frames.append(pd.read_csv(path))
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def load_ensemble(layout: RunLayout, index: int) -> EnsembleSet:
    require_checkpoint(layout.ensemble_dir(index) / "ensemble.json")
    return EnsembleSet.load(layout.ensemble_dir(index))


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def _calibrate_seed(cell: Tuple[ExperimentConfig, int]) -> List[Dict[str, Any]]:
    config, index = cell
    layout = RunLayout(config.output_path)
    ensemble = load_ensemble(layout, index)
    vanilla = ensemble.vanilla
    members = [m.pair for m in ensemble.robust]

    probe_env = env_factory(config, config.eval_scenario)()
    probe_env.seed(np.random.default_rng(cell_seed(config, index, "probe")))
    probes = harvest_probe_states(vanilla, probe_env, config.shift.probe_states)

    levels = sorted(set((0.0,) + tuple(config.epsilons)))
    reports = []
    for epsilon in levels:
        rng = np.random.default_rng(cell_seed(config, index, "calibrate", f"{epsilon:g}"))
        reports.append(shift_vector(members, vanilla, probes, epsilon, config.attack, rng,
                                    config.shift.reference, config.shift.k_mult))
    save_calibration(reports, layout.calibration_file(index))

    rows = []
    for report in reports:
        for model, (alpha, d, p) in enumerate(zip(report.alphas, report.d, report.p_true)):
            rows.append({"seed": index, "epsilon": report.epsilon, "model": model,
                         "alpha": alpha, "d": d, "p_true": p})
    return rows


def calibrate(config: ExperimentConfig, command: str = "calibrate") -> Dict[str, Any]:
    """Shift vectors and Bernoulli parameters per attack strength, from saved checkpoints."""
    layout = RunLayout(config.output_path)
    outcomes = _fan_out(_calibrate_seed, [(config, i) for i in range(config.n_seeds)], config.workers)
    table = pd.DataFrame([row for rows in outcomes for row in rows])

    trend_rows = []
    attacked = table[table["epsilon"] > 0.0]
    for (seed, model), group in attacked.groupby(["seed", "model"]):
        group = group.sort_values("epsilon")
        rho = spearman_trend(group["d"])
        trend_rows.append({"seed": seed, "model": model, "alpha": group["alpha"].iloc[0],
                           "spearman": rho})
        logger.info(f"Seed {seed} {format_alpha(group['alpha'].iloc[0])}: shift trend rho={rho:.3f}")

    digest = config.config_hash()
    write_table(table, layout.table("calibration"), digest, config.seed, command,
                {"attack": config.attack.to_dict()})
    write_table(pd.DataFrame(trend_rows), layout.table("calibration_trend"), digest, config.seed, command)
    return {"rows": int(len(table))}


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _evaluate_seed(cell: Tuple[ExperimentConfig, int]) -> Tuple[pd.DataFrame, pd.DataFrame]:
    config, index = cell
    layout = RunLayout(config.output_path)
    ensemble = load_ensemble(layout, index)
    calibration = load_calibration(layout.calibration_file(index))
    vanilla = ensemble.vanilla
    attack = config.evaluation_attack()
    episodes = config.evaluation.episodes
    eval_seed = cell_seed(config, index, "evaluate")
    make_eval_env = env_factory(config, config.eval_scenario)

    policies: List[Tuple[str, float, RobustPolicyPair]] = [
        ("vanilla" if m.alpha == 0.0 else "action_robust", m.alpha, m.pair) for m in ensemble
    ]
    for kind in config.evaluation.baselines:
        pair, _ = RobustPolicyPair.load(require_checkpoint(layout.baseline_checkpoint(index, kind)))
        policies.append((kind, pair.alpha, pair))

    episode_frames = []
    selection_rows = []
    for name, alpha, pair in policies:
        metrics = evaluate_policy(pair, make_eval_env(), attack, episodes, eval_seed,
                                  attack_target=vanilla)
        frame = metrics.to_frame()
        frame.insert(0, "alpha", alpha)
        frame.insert(0, "policy", name)
        episode_frames.append(frame)

    for kind in config.bandit.samplers:
        sampler = make_sampler(kind, len(ensemble), config.bandit.dts_config(len(ensemble)),
                               config.bandit.eps_greedy)
        result = deploy_switching(ensemble, make_eval_env(), attack, sampler, episodes,
                                  calibration, eval_seed, config.bandit.window,
                                  config.bandit.per_episode, config.shift.k_mult)
        frame = result.metrics.to_frame()
        frame.insert(0, "alpha", np.nan)
        frame.insert(0, "policy", f"switched_{kind}")
        episode_frames.append(frame)
        for alpha, count in result.selection_histogram().items():
            selection_rows.append({"seed": index, "sampler": kind, "alpha": alpha, "count": int(count)})

    episodes_frame = pd.concat(episode_frames, ignore_index=True)
    episodes_frame.insert(0, "seed", index)
    return episodes_frame, pd.DataFrame(selection_rows)


def evaluate(config: ExperimentConfig, command: str = "evaluate") -> Dict[str, Any]:
    """Evaluate every policy family under the configured attack; never retrains."""
    layout = RunLayout(config.output_path)
    outcomes = _fan_out(_evaluate_seed, [(config, i) for i in range(config.n_seeds)], config.workers)
    episodes = pd.concat([e for e, _ in outcomes], ignore_index=True)
    selections = pd.concat([s for _, s in outcomes], ignore_index=True)

    summary = (
        episodes.groupby(["seed", "policy", "alpha"], sort=False, dropna=False)
        .agg(mean_reward=("reward", "mean"),
             total_conflicts=("conflicts", "sum"),
             conflict_free=("conflicts", lambda c: int((c == 0).sum())),
             total_intrusions=("intrusions", "sum"),
             mean_path_length=("path_length", "mean"),
             goal_rate=("reached_goal", "mean"))
        .reset_index()
    )
    digest = config.config_hash()
    extra = {"attack": config.evaluation_attack().to_dict()}
    write_table(episodes, layout.table("evaluation_episodes"), digest, config.seed, command, extra)
    write_table(summary, layout.table("evaluation"), digest, config.seed, command, extra)
    write_table(selections, layout.table("selections"), digest, config.seed, command, extra)
    return {"policies": int(summary["policy"].nunique())}


# ---------------------------------------------------------------------------
# bandit-sim
# ---------------------------------------------------------------------------

def bandit_sim(config: ExperimentConfig, command: str = "bandit-sim") -> Dict[str, Any]:
    """Regret of every configured sampler on the bandit schedule, without the RL stack."""
    settings = config.bandit
    schedule = RewardSchedule.load(settings.schedule) if settings.schedule else RewardSchedule.canonical()
    steps = min(settings.steps, schedule.total_steps)
    curves = []
    runs = []
    for kind in settings.samplers:
        traces = run_many(kind, schedule, settings.runs, config.seed, steps,
                          settings.dts_config(schedule.n_arms), settings.eps_greedy, config.workers)
        cumulative = np.array([t.cumulative for t in traces])
        curves.append(pd.DataFrame({
            "sampler": kind,
            "step": np.arange(steps),
            "mean_cumulative_regret": cumulative.mean(axis=0),
            "std_cumulative_regret": cumulative.std(axis=0),
        }))
        for trace in traces:
            runs.append({"sampler": kind, "run": trace.seed, "total_regret": trace.total_regret})

    layout = RunLayout(config.output_path)
    digest = config.config_hash()
    extra = {"schedule": schedule.to_dict()}
    write_table(pd.concat(curves, ignore_index=True), layout.table("regret"), digest,
                config.seed, command, extra)
    write_table(pd.DataFrame(runs), layout.table("regret_runs"), digest, config.seed, command, extra)
    return {"samplers": len(settings.samplers), "steps": steps}


STAGES: Dict[str, Callable[[ExperimentConfig, str], Dict[str, Any]]] = {
    "train-ensemble": train_ensemble,
    "calibrate": calibrate,
    "evaluate": evaluate,
    "bandit-sim": bandit_sim,
}


def run_stage(name: str, config: ExperimentConfig) -> Dict[str, Any]:
    if name not in STAGES:
        raise ValueError(f"Unknown stage {name!r}; expected one of {sorted(STAGES)}")
    logger.info(f"Running {name} for {config.name!r} (seed {config.seed}, {config.n_seeds} seed(s))")
    config.save(config.output_path / "config.json")
    return STAGES[name](config, name)


__all__ = [
    "STAGES",
    "env_factory",
    "cell_seed",
    "load_ensemble",
    "train_ensemble",
    "calibrate",
    "evaluate",
    "bandit_sim",
    "run_stage",
]
