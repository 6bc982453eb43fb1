"""
Tests for the trainers and the entropy-gap ensemble builder.
"""

import numpy as np
import pytest

from antifragile_rl.environment import ACTION_HIGH, ACTION_LOW, OBS_DIM, make_env
from antifragile_rl.exceptions import EnsembleEmptyError, TrainingDivergedError
from antifragile_rl.robust_rl import (
    DdpgTrainer,
    EnsembleMember,
    EnsembleSet,
    EntropyGapReport,
    RobustPolicyPair,
    TrainingConfig,
    TrainingResult,
    build_ensemble,
    train_action_robust,
    train_adversarial_ddpg,
    train_nr_mdp,
    train_pr_mdp,
    train_vanilla_ddpg,
)


def make_pair(alpha, seed=0):
    return RobustPolicyPair(OBS_DIM, 3, ACTION_LOW, ACTION_HIGH, alpha=alpha,
                            rng=np.random.default_rng(seed), hidden=8)


class TestTrainingConfig:

    def test_defaults(self):
        cfg = TrainingConfig()
        assert cfg.episodes == 200
        assert cfg.exploration_episodes == 30
        assert cfg.alpha_grid == (0.1, 0.2, 0.3, 0.4)
        assert cfg.entropy_threshold == 0.5

    @pytest.mark.parametrize("kwargs", [
        {"episodes": 0},
        {"episodes": 10, "exploration_episodes": 10},
        {"batch_size": 64, "buffer_capacity": 32},
        {"gamma": 1.5},
        {"momentum": 1.0},
        {"exploration_noise": (0.0, -0.1)},
        {"alpha_grid": (0.2, 0.1)},
        {"alpha_grid": (0.0, 0.1)},
        {"sgld_rho": 1.0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            TrainingConfig(**kwargs)

    def test_dict_round_trip(self):
        cfg = TrainingConfig(episodes=50, alpha_grid=(0.1, 0.3))
        assert TrainingConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_field(self):
        with pytest.raises(ValueError, match="learning_rate"):
            TrainingConfig.from_dict({"learning_rate": 0.1})


class TestDdpgTrainer:

    def test_unknown_kind(self, short_env, tiny_config):
        with pytest.raises(ValueError):
            DdpgTrainer(short_env, tiny_config, kind="ppo")

    def test_vanilla_ignores_alpha(self, short_env, tiny_config):
        assert DdpgTrainer(short_env, tiny_config, kind="vanilla", alpha=0.4).alpha == 0.0

    def test_trainstep_waits_for_batch(self, short_env, tiny_config):
        trainer = DdpgTrainer(short_env, tiny_config, kind="action_robust", alpha=0.2)
        assert trainer.sgld_trainstep() is False
        assert trainer.update_ticks == 0

    def test_trainstep_updates(self, short_env, tiny_config, filled_buffer):
        trainer = DdpgTrainer(short_env, tiny_config, kind="action_robust", alpha=0.2)
        trainer.buffer = filled_buffer
        agent = trainer.pair.agent.get_flat()
        critic = trainer.pair.critic.get_flat()
        assert trainer.sgld_trainstep() is True
        assert trainer.update_ticks == 1
        assert not np.array_equal(trainer.pair.agent.get_flat(), agent)
        assert not np.array_equal(trainer.pair.critic.get_flat(), critic)
        assert np.isfinite(trainer.last_critic_loss)

    def test_vanilla_keeps_adversary(self, short_env, tiny_config, filled_buffer):
        trainer = DdpgTrainer(short_env, tiny_config, kind="vanilla")
        trainer.buffer = filled_buffer
        adversary = trainer.pair.adversary.get_flat()
        trainer.sgld_trainstep()
        np.testing.assert_array_equal(trainer.pair.adversary.get_flat(), adversary)

    def test_nr_mdp_alternates_adversary(self, short_env, tiny_config, filled_buffer):
        trainer = DdpgTrainer(short_env, tiny_config, kind="nr_mdp", alpha=0.3)
        trainer.buffer = filled_buffer
        trainer.sgld_trainstep()
        after_first = trainer.pair.adversary.get_flat()
        trainer.sgld_trainstep()
        np.testing.assert_array_equal(trainer.pair.adversary.get_flat(), after_first)

    def test_divergence_raises(self, short_env, tiny_config, filled_buffer, mocker):
        trainer = DdpgTrainer(short_env, tiny_config, kind="action_robust", alpha=0.1)
        trainer.buffer = filled_buffer
        mocker.patch("antifragile_rl.robust_rl.trainers.critic_loss",
                     return_value=(float("nan"), []))
        with pytest.raises(TrainingDivergedError) as excinfo:
            trainer.sgld_trainstep()
        assert excinfo.value.alpha == 0.1

    def test_train_history(self, short_env, tiny_config):
        result = DdpgTrainer(short_env, tiny_config, kind="action_robust", alpha=0.2, seed=1).train()
        assert isinstance(result, TrainingResult)
        assert [e.phase for e in result.episodes] == ["explore", "exploit", "exploit"]
        assert result.env_steps == sum(e.steps for e in result.episodes)
        assert result.updates > 0
        assert result.pair.is_finite()
        assert len(result.explore_rewards) == 1
        frame = result.to_frame()
        assert list(frame.columns[:3]) == ["kind", "alpha", "episode"]
        assert len(frame) == 3

    def test_observation_statistics_collected(self, short_env, tiny_config):
        result = train_vanilla_ddpg(short_env, tiny_config, seed=2)
        assert result.pair.obs_stats.count == result.env_steps


class TestTrainerIdentities:
    """Zero perturbation knobs leave the agent's training path unchanged."""

    def test_vanilla_is_action_robust_at_zero(self, tiny_config):
        vanilla = train_vanilla_ddpg(make_env("training", seed=0, max_steps=30), tiny_config, seed=4)
        robust = train_action_robust(make_env("training", seed=0, max_steps=30), 0.0, tiny_config, seed=4)
        assert vanilla.rewards == robust.rewards
        np.testing.assert_array_equal(vanilla.pair.agent.get_flat(), robust.pair.agent.get_flat())

    def test_adversarial_at_zero_epsilon(self, tiny_config):
        vanilla = train_vanilla_ddpg(make_env("training", seed=0, max_steps=30), tiny_config, seed=4)
        adversarial = train_adversarial_ddpg(make_env("training", seed=0, max_steps=30), 0.0,
                                             tiny_config, seed=4)
        assert vanilla.rewards == adversarial.rewards

    @pytest.mark.parametrize("train", [train_pr_mdp, train_nr_mdp])
    def test_adversary_mdps_at_zero_alpha(self, tiny_config, train):
        vanilla = train_vanilla_ddpg(make_env("training", seed=0, max_steps=30), tiny_config, seed=4)
        robust = train(make_env("training", seed=0, max_steps=30), 0.0, tiny_config, seed=4)
        assert vanilla.rewards == robust.rewards
        np.testing.assert_array_equal(vanilla.pair.agent.get_flat(), robust.pair.agent.get_flat())

    def test_full_takeover(self, short_env, tiny_config):
        result = train_pr_mdp(short_env, 1.0, tiny_config, seed=3)
        assert sum(e.takeovers for e in result.episodes) == result.env_steps

    def test_seed_reproducible(self, tiny_config):
        a = train_action_robust(make_env("training", seed=0, max_steps=30), 0.2, tiny_config, seed=9)
        b = train_action_robust(make_env("training", seed=0, max_steps=30), 0.2, tiny_config, seed=9)
        assert a.rewards == b.rewards


def fake_result(alpha, delta_h):
    report = EntropyGapReport(h_rand=delta_h + 1.0, h_opt=1.0, delta_h=delta_h)
    return TrainingResult(make_pair(alpha), "vanilla" if alpha == 0.0 else "action_robust",
                          alpha, [], report)


class TestBuildEnsemble:

    @pytest.fixture
    def gaps(self):
        return {0.1: 1.2, 0.2: 0.8, 0.3: 0.2, 0.4: 2.0}

    @pytest.fixture
    def mocked_training(self, mocker, gaps):
        robust = mocker.patch("antifragile_rl.robust_rl.trainers.train_action_robust",
                              side_effect=lambda env, alpha, config, seed: fake_result(alpha, gaps[alpha]))
        vanilla = mocker.patch("antifragile_rl.robust_rl.trainers.train_vanilla_ddpg",
                               side_effect=lambda env, config, seed: fake_result(0.0, 0.0))
        return robust, vanilla

    def test_stops_at_first_failure(self, mocked_training, short_env):
        robust, vanilla = mocked_training
        seen = []
        ensemble = build_ensemble(short_env, TrainingConfig(), seed=0,
                                  on_candidate=lambda result, ok: seen.append((result.alpha, ok)))
        assert ensemble.alphas == [0.0, 0.1, 0.2]
        assert robust.call_count == 3
        assert vanilla.call_count == 1
        assert seen == [(0.1, True), (0.2, True), (0.3, False), (0.0, True)]

    def test_given_vanilla_is_not_retrained(self, mocked_training, short_env):
        robust, vanilla = mocked_training
        pair = make_pair(0.0, seed=11)
        ensemble = build_ensemble(short_env, TrainingConfig(), vanilla=pair)
        assert ensemble.vanilla is pair
        assert vanilla.call_count == 0

    def test_empty_ensemble(self, mocker, short_env):
        mocker.patch("antifragile_rl.robust_rl.trainers.train_action_robust",
                     side_effect=lambda env, alpha, config, seed: fake_result(alpha, 0.1))
        with pytest.raises(EnsembleEmptyError):
            build_ensemble(short_env, TrainingConfig())

    def test_env_factory(self, mocked_training):
        calls = []

        def factory():
            calls.append(1)
            return make_env("training", seed=len(calls))

        build_ensemble(factory, TrainingConfig())
        assert len(calls) == 4

    @pytest.mark.slow
    def test_real_training(self):
        config = TrainingConfig(episodes=4, exploration_episodes=2, batch_size=16,
                                buffer_capacity=1000, hidden_units=8, alpha_grid=(0.1, 0.2),
                                entropy_threshold=-10.0)
        ensemble = build_ensemble(lambda: make_env("training", seed=0, max_steps=40), config, seed=1)
        assert ensemble.alphas == [0.0, 0.1, 0.2]
        assert all(m.entropy is not None for m in ensemble)


class TestEnsembleSet:

    def test_ordering(self):
        with pytest.raises(ValueError):
            EnsembleSet([EnsembleMember(0.2, make_pair(0.2)), EnsembleMember(0.1, make_pair(0.1))])

    def test_vanilla_required(self):
        ensemble = EnsembleSet([EnsembleMember(0.1, make_pair(0.1))])
        with pytest.raises(ValueError):
            ensemble.vanilla

    def test_robust_members(self):
        ensemble = EnsembleSet([EnsembleMember(a, make_pair(a)) for a in (0.0, 0.1, 0.3)])
        assert [m.alpha for m in ensemble.robust] == [0.1, 0.3]
        assert len(ensemble) == 3
        assert ensemble[2].alpha == 0.3

    def test_save_load(self, tmp_path, rng):
        report = EntropyGapReport(2.0, 0.5, 1.5)
        ensemble = EnsembleSet([EnsembleMember(0.0, make_pair(0.0, 1)),
                                EnsembleMember(0.2, make_pair(0.2, 2), report)])
        ensemble.save(tmp_path / "ensemble")
        loaded = EnsembleSet.load(tmp_path / "ensemble")
        assert loaded.alphas == [0.0, 0.2]
        assert loaded[1].entropy == report
        assert loaded[0].entropy is None
        obs = rng.normal(size=OBS_DIM)
        np.testing.assert_array_equal(loaded[1].pair.act(obs), ensemble[1].pair.act(obs))

    def test_load_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            EnsembleSet.load(tmp_path)
