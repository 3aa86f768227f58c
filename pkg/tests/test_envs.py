import math

import numpy as np
import pytest

from replay_dynamics.neural_control import Acrobot, CartPole, ControlEnvState, MountainCar, control_env_step, make_env

NAMES = ["cartpole", "mountaincar", "acrobot"]


class TestCartPole:
    def test_one_step_from_rest(self):
        env = CartPole()
        s, r, done = env.step(ControlEnvState("cartpole", (0.0, 0.0, 0.0, 0.0)), 1)
        # hand-derived: temp = 10/1.1, theta_acc = -temp / (0.5 (4/3 - 0.1/1.1))
        temp = 10 / 1.1
        theta_acc = -temp / (0.5 * (4 / 3 - 0.1 / 1.1))
        x_acc = temp - 0.05 * theta_acc / 1.1
        assert s.physics == pytest.approx((0.0, 0.02 * x_acc, 0.0, 0.02 * theta_acc), rel=1e-12)
        assert s.physics[1] == pytest.approx(0.195122, abs=1e-6)
        assert s.physics[3] == pytest.approx(-0.292683, abs=1e-6)
        assert r == 1.0 and not done

    def test_actions_are_mirror_images(self):
        env = CartPole()
        rest = ControlEnvState("cartpole", (0.0, 0.0, 0.0, 0.0))
        left, right = env.step(rest, 0)[0], env.step(rest, 1)[0]
        assert left.physics == pytest.approx(tuple(-u for u in right.physics))

    @pytest.mark.parametrize("physics", [(0.0, 0.0, 0.21, 0.0), (2.39, 1.0, 0.0, 0.0)])
    def test_failure_terminates(self, physics):
        s, _, done = CartPole().step(ControlEnvState("cartpole", physics), 1)
        assert done and s.terminal and not s.truncated

    def test_step_cap_truncates(self):
        env = CartPole(max_steps=3)
        s = ControlEnvState("cartpole", (0.0, 0.0, 0.0, 0.0))
        for action in (1, 0, 1):
            s, _, done = env.step(s, action)
        assert done and s.truncated and s.steps == 3


class TestMountainCar:
    def test_equilibrium_at_rest(self):
        s = ControlEnvState("mountaincar", (-math.pi / 6, 0.0))
        nxt, r, done = MountainCar().step(s, 1)
        assert nxt.physics == pytest.approx(s.physics, abs=1e-15)
        assert r == -1.0 and not done

    def test_goal_terminates(self):
        s, _, done = MountainCar().step(ControlEnvState("mountaincar", (0.49, 0.07)), 2)
        assert done and s.physics[0] >= 0.5

    def test_left_wall_stops(self):
        s, _, _ = MountainCar().step(ControlEnvState("mountaincar", (-1.19, -0.07)), 0)
        assert s.physics == (-1.2, 0.0)

    def test_speed_clipped(self):
        s, _, _ = MountainCar().step(ControlEnvState("mountaincar", (-0.5, 0.07)), 2)
        assert s.physics[1] == pytest.approx(0.07)


class TestAcrobot:
    def test_energy_conserved_without_torque(self):
        env = Acrobot()
        state = (1.0, 0.5, 0.0, 0.0)
        e0 = env.energy(state)
        worst = 0.0
        for _ in range(100):
            state = env.integrate(state, 0.0, env.dt)
            worst = max(worst, abs(env.energy(state) - e0))
        assert worst <= 0.02 * abs(e0)

    def test_hanging_rest_is_fixed(self):
        env = Acrobot()
        s, r, done = env.step(ControlEnvState("acrobot", (0.0, 0.0, 0.0, 0.0)), 1)
        assert s.physics == pytest.approx((0.0, 0.0, 0.0, 0.0), abs=1e-12)
        assert r == -1.0 and not done

    def test_goal_reward(self):
        # links pointing up already clear the goal height
        s, r, done = Acrobot().step(ControlEnvState("acrobot", (math.pi, 0.0, 0.0, 0.0)), 1)
        assert done and r == 0.0

    def test_observation(self):
        env = Acrobot()
        obs = env.observe(ControlEnvState("acrobot", (0.0, math.pi / 2, 0.3, -0.4)))
        np.testing.assert_allclose(obs, [1.0, 0.0, 0.0, 1.0, 0.3, -0.4], atol=1e-15)

    def test_velocities_clipped(self):
        env = Acrobot()
        s, _, _ = env.step(ControlEnvState("acrobot", (0.0, 0.0, 100.0, -100.0)), 1)
        assert abs(s.physics[2]) <= env.max_vel_1 and abs(s.physics[3]) <= env.max_vel_2
        assert all(-math.pi <= a < math.pi for a in s.physics[:2])


class TestCommon:
    @pytest.mark.parametrize("name", NAMES)
    def test_random_rollouts_respect_bounds(self, name):
        env = make_env(name)
        rng = np.random.default_rng(0)
        lo, hi = env.reward_range
        for _ in range(5):
            s = env.reset(rng)
            assert env.observe(s).shape == (env.obs_dim,)
            done = False
            while not done:
                s, r, done = env.step(s, int(rng.integers(env.n_actions)))
                assert lo <= r <= hi
                assert np.all(np.isfinite(env.observe(s)))
            assert s.steps <= env.max_steps

    @pytest.mark.parametrize("name", NAMES)
    def test_stepping_terminal_state_raises(self, name):
        env = make_env(name, max_steps=1)
        s, _, done = env.step(env.reset(np.random.default_rng(0)), 0)
        assert done
        with pytest.raises(ValueError):
            env.step(s, 0)

    @pytest.mark.parametrize("name", NAMES)
    def test_invalid_action(self, name):
        env = make_env(name)
        with pytest.raises(ValueError):
            env.step(env.reset(np.random.default_rng(0)), env.n_actions)

    def test_unknown_environment(self):
        with pytest.raises(ValueError):
            make_env("pendulum")

    def test_default_step_helper(self):
        s = ControlEnvState("cartpole", (0.0, 0.0, 0.0, 0.0))
        assert control_env_step(s, 1) == CartPole().step(s, 1)
