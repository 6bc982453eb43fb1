"""
Tests for the numpy network kernel, optimizers and checkpoints.
"""

import numpy as np
import pytest

from antifragile_rl.neural import (
    AdamOptimizer,
    MomentumOptimizer,
    Mlp,
    RunningMeanStd,
    SgldNoiseState,
    flatten,
    hard_update,
    load_networks,
    save_networks,
    sgld_perturb,
    soft_update,
    unflatten,
)


@pytest.fixture
def critic():
    return Mlp([5, 8, 8, 1], rng=np.random.default_rng(0))


@pytest.fixture
def policy():
    return Mlp.policy(4, 3, [0.1, 0.1, 0.0], [3.0, 3.0, 6.0], hidden=8, rng=np.random.default_rng(1))


class TestMlp:
    """Test forward and backward passes."""

    def test_shapes(self, critic):
        assert critic.forward(np.zeros(5)).shape == (1,)
        assert critic.forward(np.zeros((7, 5))).shape == (7, 1)
        assert critic.n_layers == 3
        assert critic.n_params == 5 * 8 + 8 + 8 * 8 + 8 + 8 + 1

    def test_batch_rows_independent(self, critic, rng):
        batch = rng.normal(size=(4, 5))
        np.testing.assert_allclose(critic.forward(batch)[2], critic.forward(batch[2]))

    def test_policy_bounds(self, policy, rng):
        out = policy.forward(rng.normal(scale=50.0, size=(100, 4)))
        assert np.all(out >= [0.1, 0.1, 0.0])
        assert np.all(out <= [3.0, 3.0, 6.0])

    def test_wrong_input_size(self, critic):
        with pytest.raises(ValueError):
            critic.forward(np.zeros(4))

    @pytest.mark.parametrize("sizes", [[3], [3, 0, 1], []])
    def test_invalid_sizes(self, sizes):
        with pytest.raises(ValueError):
            Mlp(sizes)

    def test_input_gradient(self, policy, rng):
        x = rng.normal(size=(3, 4))
        weights = rng.normal(size=(3, 3))
        _, cache = policy.forward_with_cache(x)
        _, grad_input = policy.backward(cache, weights)
        h = 1e-6
        for i in range(4):
            e = np.zeros(4)
            e[i] = h
            numeric = (np.sum(weights * policy.forward(x + e)) - np.sum(weights * policy.forward(x - e))) / (2 * h)
            assert grad_input[:, i].sum() == pytest.approx(numeric, rel=1e-4, abs=1e-8)

    def test_parameter_gradient(self, critic, rng):
        x = rng.normal(size=(6, 5))
        _, cache = critic.forward_with_cache(x)
        grads, _ = critic.backward(cache, np.ones((6, 1)))
        flat = critic.get_flat()
        analytic = flatten(grads)
        h = 1e-6
        for index in rng.choice(flat.size, size=20, replace=False):
            bumped = flat.copy()
            bumped[index] += h
            critic.set_flat(bumped)
            up = critic.forward(x).sum()
            bumped[index] -= 2 * h
            critic.set_flat(bumped)
            down = critic.forward(x).sum()
            assert analytic[index] == pytest.approx((up - down) / (2 * h), rel=1e-4, abs=1e-7)
        critic.set_flat(flat)

    def test_copy_is_independent(self, critic):
        clone = critic.copy()
        clone.params[0] += 1.0
        assert not np.allclose(clone.params[0], critic.params[0])


class TestFlatten:

    def test_unflatten_shapes(self):
        like = [np.zeros((2, 3)), np.zeros(4)]
        out = unflatten(np.arange(10.0), like)
        assert [a.shape for a in out] == [(2, 3), (4,)]
        np.testing.assert_array_equal(flatten(out), np.arange(10.0))

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            unflatten(np.arange(5.0), [np.zeros(4)])


class TestOptimizers:

    def test_adam_minimizes_quadratic(self):
        params = [np.array([3.0, -2.0])]
        optimizer = AdamOptimizer(params, lr=0.1, weight_decay=0.0)
        for _ in range(300):
            optimizer.step(params, [2.0 * params[0]])
        assert np.linalg.norm(params[0]) < 0.1

    def test_adam_first_step_size(self):
        params = [np.array([1.0])]
        AdamOptimizer(params, lr=0.01, weight_decay=0.0).step(params, [np.array([5.0])])
        assert params[0][0] == pytest.approx(0.99, abs=1e-6)

    def test_momentum_update(self):
        params = [np.array([1.0])]
        optimizer = MomentumOptimizer(params, lr=0.1, momentum=0.9, weight_decay=0.0)
        optimizer.step(params, [np.array([1.0])])
        assert params[0][0] == pytest.approx(0.9)
        optimizer.step(params, [np.array([1.0])])
        # v = 0.9 * 1 + 1
        assert params[0][0] == pytest.approx(0.9 - 0.19)

    def test_invalid_hyperparameters(self):
        with pytest.raises(ValueError):
            AdamOptimizer([np.zeros(1)], lr=0.0)
        with pytest.raises(ValueError):
            MomentumOptimizer([np.zeros(1)], momentum=1.0)


class TestTargets:

    def test_soft_update(self):
        target = [np.array([0.0, 10.0])]
        soft_update(target, [np.array([1.0, 0.0])], 0.01)
        np.testing.assert_allclose(target[0], [0.01, 9.9])

    def test_hard_update(self, critic):
        target = Mlp([5, 8, 8, 1], rng=np.random.default_rng(9))
        hard_update(target, critic)
        np.testing.assert_array_equal(target.get_flat(), critic.get_flat())

    def test_shape_mismatch(self, critic):
        with pytest.raises(ValueError):
            soft_update(Mlp([5, 4, 1]), critic, 0.5)


class TestSgld:

    def test_zero_psi_is_identity(self, rng):
        state = SgldNoiseState(dim=4, psi=0.0)
        grad = rng.normal(size=4)
        np.testing.assert_array_equal(sgld_perturb(grad, state, rng), grad)

    def test_statistics_follow_stream(self, rng):
        state = SgldNoiseState(dim=3, rho=0.5, psi=0.1)
        for _ in range(50):
            sgld_perturb(rng.normal(size=3), state, rng)
        assert state.steps == 50
        assert np.all(state.covariance >= 0.0)

    def test_first_mean(self, rng):
        state = SgldNoiseState(dim=2, rho=0.9)
        sgld_perturb(np.array([1.0, -1.0]), state, rng)
        np.testing.assert_allclose(state.mean, [0.1, -0.1])

    def test_shape_check(self, rng):
        with pytest.raises(ValueError):
            sgld_perturb(np.zeros(3), SgldNoiseState(dim=2), rng)


class TestRunningMeanStd:

    def test_matches_numpy(self, rng):
        data = rng.normal(loc=3.0, scale=2.0, size=(500, 4))
        stats = RunningMeanStd(4)
        for chunk in np.array_split(data, 7):
            stats.update(chunk)
        np.testing.assert_allclose(stats.mean, data.mean(axis=0))
        np.testing.assert_allclose(stats.var, data.var(axis=0, ddof=1))
        assert stats.count == 500

    def test_unit_variance_before_two_samples(self):
        stats = RunningMeanStd(2)
        stats.update(np.ones(2))
        np.testing.assert_array_equal(stats.std, np.ones(2))


class TestCheckpoints:

    def test_round_trip(self, tmp_path, critic, policy):
        path = save_networks(tmp_path / "nets.npz", {"critic": critic, "agent": policy},
                             {"alpha": 0.2}, {"obs_mean": np.arange(3.0)})
        networks, metadata, extra = load_networks(path)
        assert metadata == {"alpha": 0.2}
        np.testing.assert_array_equal(networks["critic"].get_flat(), critic.get_flat())
        np.testing.assert_array_equal(networks["agent"].high, policy.high)
        np.testing.assert_array_equal(extra["obs_mean"], np.arange(3.0))
        x = np.linspace(-1, 1, 4)
        np.testing.assert_array_equal(networks["agent"].forward(x), policy.forward(x))

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_networks(tmp_path / "none.npz")
