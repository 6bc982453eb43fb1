"""
Tests for the UAV deconfliction environment.
"""

import math

import numpy as np
import pytest

from antifragile_rl.environment import (
    ACTION_HIGH,
    ACTION_LOW,
    LOG_COLUMNS,
    AgentObs,
    EpisodeConfig,
    ObstacleMotion,
    RewardComponents,
    RewardWeights,
    clamp_flight_path,
    flight_path_angle,
    load_scenario,
    make_env,
    obstacle_step,
    reward_r1,
    reward_r2,
    reward_r3,
    total_reward,
)
from antifragile_rl.exceptions import DegenerateGeometryError, EpisodeFinishedError, StartPositionError
from antifragile_rl.flowfield import ObstacleShape


def unit_obstacle():
    return ObstacleShape(np.zeros(3))


def random_actions(rng, n):
    return rng.uniform(ACTION_LOW, ACTION_HIGH, size=(n, 3))


class TestScenarios:
    """Test built-in scenarios and the JSON schema."""

    @pytest.mark.parametrize("name,count", [("training", 1), ("testing", 4), ("open_field", 0)])
    def test_builtin(self, name, count):
        scenario = load_scenario(name)
        assert scenario.name == name
        assert len(scenario.obstacles) == count

    def test_training_obstacle_drifts(self):
        scenario = load_scenario("training")
        assert scenario.obstacles[0].motion.kind == "circular_drift"
        assert scenario.obstacles[0].shape.bounding_radius == 1.5

    def test_unknown_builtin(self):
        with pytest.raises(FileNotFoundError):
            load_scenario("no_such_scenario")

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            load_scenario({"name": "x", "wind": 3})

    def test_dict_form_reloads(self):
        scenario = load_scenario("testing")
        again = load_scenario(scenario.to_dict())
        assert again.name == scenario.name
        for a, b in zip(again.obstacles, scenario.obstacles):
            np.testing.assert_array_equal(a.shape.center, b.shape.center)
            assert a.motion == b.motion

    def test_file_path(self, tmp_path):
        path = tmp_path / "one.json"
        path.write_text('{"name": "one", "obstacles": [{"center": [5, 5, 5]}]}', encoding="utf-8")
        assert len(load_scenario(path).obstacles) == 1

    def test_obstacle_count_mismatch(self):
        with pytest.raises(ValueError):
            make_env("testing", n_obstacles=1)

    def test_invalid_motion(self):
        with pytest.raises(ValueError):
            ObstacleMotion(kind="spiral")


class TestEpisodeConfig:

    def test_defaults(self):
        config = EpisodeConfig()
        assert config.start_mean == (0.0, 2.0, 5.0)
        assert config.goal == (10.0, 10.0, 5.5)
        assert config.max_steps == 500
        assert config.conflict_buffer == 0.4
        assert config.protect_radius == 1.5

    @pytest.mark.parametrize("kwargs", [
        {"start_var": 1.5},
        {"max_steps": 0},
        {"protect_radius": 0.0},
        {"max_ascent": -0.1},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            EpisodeConfig(**kwargs)


class TestReset:

    def test_zero_variance_start(self):
        env = make_env("open_field", start_var=0.0)
        env.reset(seed=3)
        np.testing.assert_array_equal(env.position, [0.0, 2.0, 5.0])

    def test_same_seed_same_observation(self):
        a = make_env("training").reset(seed=11).as_array()
        b = make_env("training").reset(seed=11).as_array()
        np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self):
        env = make_env("open_field", start_var=1.0)
        starts = {tuple(env.reset(seed=s).as_array()) for s in range(100)}
        assert len(starts) == 100

    def test_observation_layout(self, training_env):
        obs = training_env.reset(seed=0)
        np.testing.assert_allclose(obs.rel_goal, training_env.goal - training_env.position)
        np.testing.assert_allclose(obs.rel_obs, training_env.obstacle_centers[0] - training_env.position)
        np.testing.assert_array_equal(obs.obs_vel, np.zeros(3))
        assert obs.as_array().shape == (9,)

    def test_blocked_start(self):
        scenario = load_scenario({
            "name": "blocked",
            "obstacles": [{"center": [0.0, 2.0, 5.0], "semi_axes": [2.0, 2.0, 2.0]}],
            "episode": {"start_var": 0.0, "max_start_retries": 3},
        })
        with pytest.raises(StartPositionError):
            make_env(scenario).reset(seed=0)

    def test_agent_obs_size(self):
        with pytest.raises(ValueError):
            AgentObs.from_array(np.zeros(8))


class TestObstacleMotion:

    def test_first_step_moves_x_by_two(self):
        moved = obstacle_step(0, np.array([[5.0, 6.0, 5.25]]))
        np.testing.assert_allclose(moved, [[7.0, 6.0, 5.25]])

    def test_drift_keeps_z_and_step_length(self):
        centers = np.array([[5.0, 6.0, 5.25]])
        for t in range(1, 101):
            moved = obstacle_step(t, centers)
            assert np.linalg.norm(moved - centers) == pytest.approx(2.0)
            assert moved[0, 2] == 5.25
            centers = moved

    def test_sinusoid_law(self):
        motion = ObstacleMotion("sinusoid", amplitude=(1.0, 0.5, 0.0), frequency=(0.5, 0.5, 0.0),
                                phase=(0.0, 1.0, 0.0))
        origin = np.array([[1.0, 2.0, 3.0]])
        moved = obstacle_step(4, origin.copy(), origin, [motion])
        expected = origin[0] + np.array([math.sin(2.0), 0.5 * math.sin(3.0), 0.0])
        np.testing.assert_allclose(moved[0], expected)

    def test_one_motion_per_obstacle(self):
        with pytest.raises(ValueError):
            obstacle_step(1, np.zeros((2, 3)), motions=[ObstacleMotion()])


class TestRewards:
    """Hand-computed reward components."""

    @pytest.mark.parametrize("point,expected", [
        ([0.0, 0.0, 0.0], 0.0),
        ([1.0, 0.0, 0.0], 1.0),
        ([0.5, 0.0, 0.0], 0.5),
        ([1.5, 0.0, 0.0], None),
    ])
    def test_r1(self, point, expected):
        assert reward_r1(point, unit_obstacle()) == expected

    def test_r2_at_goal(self):
        goal = [10.0, 10.0, 5.5]
        assert reward_r2(goal, [5.0, 5.0, 5.0], goal, RewardWeights(c1=10.0)) == 10.0

    def test_r2_ratio(self):
        goal = np.array([0.0, 0.0, 0.0])
        weights = RewardWeights()
        assert reward_r2([3.0, 0.0, 0.0], [0.0, 3.0, 0.0], goal, weights) == pytest.approx(-1.0)
        assert reward_r2([6.0, 0.0, 0.0], [0.0, 3.0, 0.0], goal, weights) == pytest.approx(-2.0)

    def test_r2_degenerate(self):
        with pytest.raises(DegenerateGeometryError):
            reward_r2([1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0], RewardWeights())

    def test_r3_outer_edge(self):
        weights = RewardWeights(threat_margin=0.4, c2=1.0)
        assert reward_r3([1.4, 0.0, 0.0], unit_obstacle(), weights) == pytest.approx(-1.0)

    def test_r3_middle_of_band(self):
        weights = RewardWeights(threat_margin=0.4, c2=1.0)
        assert reward_r3([1.2, 0.0, 0.0], unit_obstacle(), weights) == pytest.approx(-0.8)

    @pytest.mark.parametrize("point", [[0.5, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    def test_r3_inactive(self, point):
        assert reward_r3(point, unit_obstacle(), RewardWeights(threat_margin=0.4)) is None

    def test_r1_and_r3_exclusive(self, rng):
        shape = unit_obstacle()
        weights = RewardWeights()
        for _ in range(200):
            point = rng.uniform(-2, 2, 3)
            assert reward_r1(point, shape) is None or reward_r3(point, shape, weights) is None

    @pytest.mark.parametrize("components,expected", [
        (RewardComponents(0.0, 0.0, 0.0), 0.0),
        (RewardComponents(None, -1.0, None), -1.0),
        (RewardComponents(0.5, -0.4, -0.8), -1.7),
    ])
    def test_total(self, components, expected):
        assert total_reward(components, RewardWeights()) == pytest.approx(expected)


class TestKinematics:

    def test_descent_clamped(self):
        delta = clamp_flight_path(np.array([1.0, 0.0, -10.0]), 5 * math.pi / 9, -15 * math.pi / 36)
        assert flight_path_angle(delta) == pytest.approx(-15 * math.pi / 36)
        assert delta[0] == 1.0

    def test_within_limits_untouched(self):
        delta = np.array([1.0, 1.0, 0.2])
        np.testing.assert_array_equal(clamp_flight_path(delta, 5 * math.pi / 9, -15 * math.pi / 36), delta)

    def test_zero_displacement(self):
        np.testing.assert_array_equal(clamp_flight_path(np.zeros(3), 1.0, -1.0), np.zeros(3))


class TestStep:

    def test_deterministic_rollout(self, rng):
        actions = random_actions(rng, 40)
        paths = []
        for _ in range(2):
            env = make_env("testing")
            env.reset(seed=5)
            path = []
            for action in actions:
                outcome = env.step(action)
                path.append(outcome.position)
                if outcome.done:
                    break
            paths.append(np.array(path))
        np.testing.assert_array_equal(paths[0], paths[1])

    def test_open_field_reaches_goal(self):
        env = make_env("open_field", start_var=1.0)
        for seed in range(100):
            env.reset(seed=seed)
            distance = np.linalg.norm(env.goal - env.position)
            while True:
                outcome = env.step([1.0, 1.0, 0.0])
                new_distance = np.linalg.norm(env.goal - outcome.position)
                assert new_distance < distance
                distance = new_distance
                if outcome.done:
                    break
            assert outcome.reached_goal
            assert env.steps < 500

    def test_step_invariants(self, rng):
        env = make_env("training")
        radius = env.scenario.obstacles[0].shape.bounding_radius
        env.reset(seed=2)
        previous = env.position
        for action in random_actions(rng, 200):
            outcome = env.step(action)
            delta = outcome.position - previous
            angle = flight_path_angle(delta)
            assert env.config.max_descent - 1e-9 <= angle <= env.config.max_ascent + 1e-9
            distance = np.min(np.linalg.norm(env.obstacle_centers - outcome.position, axis=1))
            assert outcome.conflict == (distance < radius + 0.4)
            assert outcome.intrusion == (distance < radius + 1.5)
            components = outcome.components
            assert components.r1 is None or components.r3 is None
            if outcome.reached_goal:
                assert outcome.done
            previous = outcome.position
            if outcome.done:
                break

    def test_max_steps(self):
        env = make_env("training", max_steps=3)
        env.reset(seed=0)
        outcomes = [env.step([1.0, 1.0, 0.5]) for _ in range(3)]
        assert [o.done for o in outcomes] == [False, False, True]
        with pytest.raises(EpisodeFinishedError):
            env.step([1.0, 1.0, 0.5])

    def test_step_before_reset(self):
        with pytest.raises(EpisodeFinishedError):
            make_env("training").step([1.0, 1.0, 0.0])

    @pytest.mark.parametrize("action", [[1.0, 1.0], [1.0, np.nan, 0.0]])
    def test_invalid_action(self, training_env, action):
        training_env.reset(seed=0)
        with pytest.raises(ValueError):
            training_env.step(action)

    def test_obstacle_velocity_observed(self, training_env):
        training_env.reset(seed=0)
        outcome = training_env.step([1.0, 1.0, 0.0])
        # the first move is (2cos 1, 2sin 1, 0) over dt
        expected = np.array([2 * math.cos(1.0), 2 * math.sin(1.0), 0.0]) / 0.1
        np.testing.assert_allclose(outcome.next_obs.obs_vel, expected)

    def test_episode_log(self):
        env = make_env("training", record_log=True, max_steps=5)
        env.reset(seed=0)
        for _ in range(5):
            env.step([1.0, 1.0, 0.0])
        log = env.episode_log()
        assert list(log.columns) == LOG_COLUMNS
        assert len(log) == 5
        assert log["step"].tolist() == [1, 2, 3, 4, 5]
        env.clear_log()
        assert env.episode_log().empty
