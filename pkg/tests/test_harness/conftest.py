import numpy as np
import pytest

from antifragile_rl.environment import ACTION_HIGH, ACTION_LOW, OBS_DIM
from antifragile_rl.harness import load_config
from antifragile_rl.robust_rl import (
    EnsembleMember,
    EnsembleSet,
    EntropyGapReport,
    EpisodeRecord,
    RobustPolicyPair,
    TrainingResult,
)


def fake_result(alpha, kind="action_robust", seed=0):
    pair = RobustPolicyPair(OBS_DIM, 3, ACTION_LOW, ACTION_HIGH, alpha=alpha,
                            rng=np.random.default_rng(seed), hidden=8, kind=kind)
    episodes = [EpisodeRecord(0, "explore", -4.0, 10, False, 2),
                EpisodeRecord(1, "exploit", -1.5, 10, False, 0)]
    return TrainingResult(pair, kind, alpha, episodes, EntropyGapReport(1.5, 0.5, 1.0), env_steps=20)


@pytest.fixture
def tiny_config(tmp_path):
    """Fast profile shrunk to a few short episodes."""
    return load_config(profile="fast", overrides={
        "output_dir": str(tmp_path / "run"),
        "environment": {"max_steps": 10},
        "training": {"hidden_units": 8},
        "attack": {"kind": "pgd", "n_steps": 2},
        "epsilons": [0.5],
        "shift": {"probe_states": 16},
        "bandit": {"samplers": ["dts"], "runs": 2, "steps": 50, "window": 4},
        "evaluation": {"episodes": 1, "baselines": ["nr_mdp"]},
    })


@pytest.fixture
def mocked_training(mocker):
    """Ensemble builder and benchmark trainer replaced by untrained pairs."""

    def build(env, config=None, seed=0, vanilla=None, on_candidate=None):
        accepted = [fake_result(0.1, seed=1), fake_result(0.2, seed=2)]
        vanilla_result = fake_result(0.0, "vanilla", seed=4)
        for result in accepted:
            on_candidate(result, True)
        on_candidate(fake_result(0.3, seed=3), False)
        on_candidate(vanilla_result, True)
        return EnsembleSet([EnsembleMember(0.0, vanilla_result.pair)]
                           + [EnsembleMember(r.alpha, r.pair, r.entropy) for r in accepted])

    ensemble = mocker.patch("antifragile_rl.harness.experiments.build_ensemble", side_effect=build)
    baseline = mocker.patch("antifragile_rl.harness.experiments.train_nr_mdp",
                            side_effect=lambda env, alpha, cfg, seed: fake_result(alpha, "nr_mdp", seed=5))
    return ensemble, baseline
