"""
Tests for reward schedules and synthetic switching runs.
"""

import json

import numpy as np
import pytest

from antifragile_rl.bandit import (
    DiscountedThompsonSampler,
    RewardSchedule,
    load_calibration_fixture,
    make_sampler,
    mean_cumulative_regret,
    regret_growth_ratio,
    run_many,
    run_switching,
)


class TestRewardSchedule:

    def test_canonical(self, canonical):
        assert canonical.n_arms == 2
        assert canonical.total_steps == 4000
        assert canonical.boundaries == [800, 1600, 2400, 3200]
        assert canonical.labels[0] == "epsilon=0.5"

    def test_canonical_crossover(self, canonical):
        first = np.argmax(canonical.p_at(0))
        second = np.argmax(canonical.p_at(800))
        assert (first, second) == (1, 0)

    def test_lead_changes_at_every_level(self, canonical):
        leaders = [int(np.argmax(p)) for _, p in canonical.segments]
        assert all(a != b for a, b in zip(leaders, leaders[1:]))
        assert all(max(p) == pytest.approx(0.9) for _, p in canonical.segments)

    def test_p_at(self, canonical):
        assert canonical.p_at(799) == canonical.segments[0][1]
        assert canonical.p_at(3999) == canonical.segments[4][1]
        with pytest.raises(IndexError):
            canonical.p_at(4000)

    def test_as_arrays(self):
        schedule = RewardSchedule(((2, (0.1, 0.2)), (3, (0.5, 0.4))))
        table, index = schedule.as_arrays()
        assert table.shape == (5, 2)
        np.testing.assert_array_equal(index, [0, 0, 1, 1, 1])
        table, index = schedule.as_arrays(3)
        assert len(table) == 3
        with pytest.raises(ValueError):
            schedule.as_arrays(6)

    @pytest.mark.parametrize("segments", [
        (),
        ((10, (0.5, 1.2)),),
        ((10, (0.5, 0.5)), (10, (0.5,))),
        ((0, (0.5,)),),
    ])
    def test_invalid(self, segments):
        with pytest.raises(ValueError):
            RewardSchedule(segments)

    def test_labels_must_match(self):
        with pytest.raises(ValueError):
            RewardSchedule(((5, (0.5,)),), ("a", "b"))

    def test_load(self, tmp_path, canonical):
        path = tmp_path / "schedule.json"
        path.write_text(json.dumps(canonical.to_dict()), encoding="utf-8")
        assert RewardSchedule.load(path) == canonical

    def test_from_calibration_steps(self):
        fixture = load_calibration_fixture()
        schedule = RewardSchedule.from_calibration(fixture, steps_per_level=10)
        assert schedule.total_steps == 10 * len(fixture["levels"])
        assert schedule.n_arms == len(fixture["alphas"])

    def test_from_calibration_alphas(self):
        fixture = load_calibration_fixture()
        schedule = RewardSchedule.from_calibration(fixture, alphas=[0.3, 0.0])
        first = fixture["levels"][0]["p_true"]
        assert schedule.segments[0][1] == (first[3], first[0])
        with pytest.raises(ValueError):
            RewardSchedule.from_calibration(fixture, alphas=[0.25])


class TestRunSwitching:

    def test_single_arm_has_no_regret(self):
        schedule = RewardSchedule(((50, (0.3,)), (50, (0.8,))))
        trace = run_switching(DiscountedThompsonSampler(1), schedule, seed=2)
        assert trace.total_regret == 0.0
        assert len(trace) == 100

    def test_arm_mismatch(self, canonical):
        with pytest.raises(ValueError):
            run_switching(DiscountedThompsonSampler(3), canonical)

    def test_trace(self, canonical):
        trace = run_switching(DiscountedThompsonSampler(canonical.n_arms), canonical, steps=1000, seed=3)
        assert len(trace) == 1000
        assert np.all(np.diff(trace.cumulative) >= 0.0)
        assert np.all(trace.regret >= 0.0)
        assert set(np.unique(trace.rewards)) <= {0.0, 1.0}
        assert trace.selection_histogram(canonical.n_arms).sum() == 1000
        np.testing.assert_array_equal(trace.segments[799:801], [0, 1])
        frame = trace.to_frame()
        assert list(frame.columns) == ["step", "segment", "arm", "reward", "regret", "cumulative_regret"]

    def test_regret_against_segment_best(self):
        schedule = RewardSchedule(((20, (0.2, 0.7)),))
        trace = run_switching(make_sampler("eps", 2, epsilon=1.0), schedule, seed=0)
        expected = np.where(trace.arms == 0, 0.5, 0.0)
        np.testing.assert_allclose(trace.regret, expected)

    def test_reproducible(self, canonical):
        a = run_switching(DiscountedThompsonSampler(canonical.n_arms), canonical, steps=300, seed=8)
        b = run_switching(DiscountedThompsonSampler(canonical.n_arms), canonical, steps=300, seed=8)
        np.testing.assert_array_equal(a.arms, b.arms)
        np.testing.assert_array_equal(a.rewards, b.rewards)

    def test_sampler_is_reset(self, two_arm):
        sampler = DiscountedThompsonSampler(2)
        first = run_switching(sampler, two_arm, steps=200, seed=1)
        second = run_switching(sampler, two_arm, steps=200, seed=1)
        np.testing.assert_array_equal(first.arms, second.arms)


class TestRunMany:

    def test_prefix_stable(self, two_arm):
        three = run_many("dts", two_arm, 3, master_seed=4, steps=100)
        two = run_many("dts", two_arm, 2, master_seed=4, steps=100)
        for a, b in zip(two, three):
            np.testing.assert_array_equal(a.arms, b.arms)
        assert [t.seed for t in three] == [0, 1, 2]

    def test_mean_cumulative_regret(self, two_arm):
        traces = run_many("ucb", two_arm, 4, steps=50)
        curve = mean_cumulative_regret(traces)
        assert curve.shape == (50,)
        assert curve[-1] == pytest.approx(np.mean([t.total_regret for t in traces]))

    def test_growth_ratio_needs_horizon(self, two_arm):
        traces = run_many("ts", two_arm, 2, steps=100)
        with pytest.raises(ValueError):
            regret_growth_ratio(traces, 60)

    def test_thompson_regret_is_sublinear(self, two_arm):
        traces = run_many("ts", two_arm, 50, master_seed=1)
        assert regret_growth_ratio(traces, 1000) < 2.0

    def test_dts_regret_slope_below_mean_gap(self, two_arm):
        traces = run_many("dts", two_arm, 20, master_seed=2)
        # a uniformly random switcher loses the mean gap every step
        slope = np.mean([t.total_regret for t in traces]) / two_arm.total_steps
        assert slope < 0.4

    def test_dts_prefers_best_arm(self):
        schedule = RewardSchedule.stationary([0.9, 0.1], 1000)
        traces = run_many("dts", schedule, 20, master_seed=3)
        freq = [t.selection_frequency(0, start=500) for t in traces]
        assert np.mean(freq) >= 0.8

    @pytest.mark.slow
    def test_dts_stationary_convergence(self):
        schedule = RewardSchedule.stationary([0.9, 0.1], 5000)
        traces = run_many("dts", schedule, 100, master_seed=0)
        freq = np.array([t.selection_frequency(0, start=4500) for t in traces])
        assert freq.mean() >= 0.8
        assert np.sum(freq >= 0.8) >= 95

    @pytest.mark.slow
    def test_dts_beats_thompson_on_canonical(self, canonical):
        dts = run_many("dts", canonical, 100, master_seed=0)
        ts = run_many("ts", canonical, 100, master_seed=0)
        assert mean_cumulative_regret(dts)[-1] < mean_cumulative_regret(ts)[-1]

    @pytest.mark.slow
    @pytest.mark.parametrize("horizon", [500, 1000, 2000])
    def test_dts_regret_sublinear_on_canonical(self, canonical, horizon):
        traces = run_many("dts", canonical, 100, master_seed=0)
        assert regret_growth_ratio(traces, horizon) < 2.0

    @pytest.mark.slow
    def test_modal_arm_after_crossover(self, canonical):
        traces = run_many("dts", canonical, 100, master_seed=5)
        best = int(np.argmax(canonical.p_at(800)))
        modal = [int(np.argmax(np.bincount(t.arms[1500:1600], minlength=canonical.n_arms)))
                 for t in traces]
        assert sum(m == best for m in modal) >= 95

    @pytest.mark.slow
    def test_parallel_matches_serial(self, two_arm):
        serial = run_many("dts", two_arm, 4, steps=200)
        parallel = run_many("dts", two_arm, 4, steps=200, workers=2)
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.arms, b.arms)