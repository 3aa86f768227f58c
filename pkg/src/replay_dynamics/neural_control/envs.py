"""Classic control tasks: cart-pole, mountain-car and acrobot.

Dynamics and constants follow the standard published formulations used by
the common RL benchmark suites, so results do not depend on an external
simulator. Every environment terminates on its failure/goal condition or
on the step cap; hitting the cap sets ``truncated`` as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class ControlEnvState:
    env: str
    physics: tuple[float, ...]
    steps: int = 0
    terminal: bool = False
    truncated: bool = False


class ControlEnv:
    name: str
    n_actions: int
    obs_dim: int
    max_steps: int
    reward_range: tuple[float, float]

    def reset(self, rng: np.random.Generator) -> ControlEnvState:
        raise NotImplementedError

    def observe(self, s: ControlEnvState) -> np.ndarray:
        return np.array(s.physics, dtype=float)

    def _dynamics(self, physics: tuple[float, ...], action: int):
        """Return ``(next_physics, reward, done)``."""
        raise NotImplementedError

    def step(self, s: ControlEnvState, action: int) -> tuple[ControlEnvState, float, bool]:
        if s.terminal:
            raise ValueError("cannot step a terminal state; reset first")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"invalid action {action} for {self.name}")
        physics, reward, done = self._dynamics(s.physics, int(action))
        steps = s.steps + 1
        truncated = not done and steps >= self.max_steps
        nxt = replace(s, physics=physics, steps=steps, terminal=done or truncated, truncated=truncated)
        return nxt, reward, nxt.terminal


class CartPole(ControlEnv):
    name = "cartpole"
    n_actions = 2
    obs_dim = 4
    reward_range = (1.0, 1.0)

    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    length = 0.5  # half the pole length
    force_mag = 10.0
    tau = 0.02
    theta_threshold = 12 * 2 * math.pi / 360
    x_threshold = 2.4

    def __init__(self, max_steps: int = 200):
        self.max_steps = max_steps

    def reset(self, rng):
        return ControlEnvState(self.name, tuple(float(u) for u in rng.uniform(-0.05, 0.05, 4)))

    def _dynamics(self, physics, action):
        x, x_dot, theta, theta_dot = physics
        total = self.masspole + self.masscart
        pml = self.masspole * self.length
        force = self.force_mag if action == 1 else -self.force_mag
        cos, sin = math.cos(theta), math.sin(theta)
        temp = (force + pml * theta_dot**2 * sin) / total
        theta_acc = (self.gravity * sin - cos * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * cos**2 / total)
        )
        x_acc = temp - pml * theta_acc * cos / total
        x = x + self.tau * x_dot
        x_dot = x_dot + self.tau * x_acc
        theta = theta + self.tau * theta_dot
        theta_dot = theta_dot + self.tau * theta_acc
        done = abs(x) > self.x_threshold or abs(theta) > self.theta_threshold
        return (x, x_dot, theta, theta_dot), 1.0, done


class MountainCar(ControlEnv):
    name = "mountaincar"
    n_actions = 3
    obs_dim = 2
    reward_range = (-1.0, -1.0)

    min_position = -1.2
    max_position = 0.6
    max_speed = 0.07
    goal_position = 0.5
    force = 0.001
    gravity = 0.0025

    def __init__(self, max_steps: int = 200):
        self.max_steps = max_steps

    def reset(self, rng):
        return ControlEnvState(self.name, (float(rng.uniform(-0.6, -0.4)), 0.0))

    def _dynamics(self, physics, action):
        position, velocity = physics
        velocity += (action - 1) * self.force - math.cos(3 * position) * self.gravity
        velocity = min(max(velocity, -self.max_speed), self.max_speed)
        position += velocity
        position = min(max(position, self.min_position), self.max_position)
        if position == self.min_position and velocity < 0:
            velocity = 0.0
        return (position, velocity), -1.0, position >= self.goal_position


class Acrobot(ControlEnv):
    """Two-link underactuated pendulum; torque on the second joint only."""

    name = "acrobot"
    n_actions = 3
    obs_dim = 6
    reward_range = (-1.0, 0.0)

    dt = 0.2
    link_length_1 = 1.0
    link_mass_1 = 1.0
    link_mass_2 = 1.0
    link_com_1 = 0.5
    link_com_2 = 0.5
    link_moi = 1.0
    max_vel_1 = 4 * math.pi
    max_vel_2 = 9 * math.pi
    torques = (-1.0, 0.0, 1.0)
    g = 9.8

    def __init__(self, max_steps: int = 500):
        self.max_steps = max_steps

    def reset(self, rng):
        return ControlEnvState(self.name, tuple(float(u) for u in rng.uniform(-0.1, 0.1, 4)))

    def observe(self, s):
        t1, t2, d1, d2 = s.physics
        return np.array([math.cos(t1), math.sin(t1), math.cos(t2), math.sin(t2), d1, d2])

    def derivatives(self, state, torque):
        m1, m2 = self.link_mass_1, self.link_mass_2
        l1, lc1, lc2 = self.link_length_1, self.link_com_1, self.link_com_2
        i1 = i2 = self.link_moi
        g = self.g
        theta1, theta2, dtheta1, dtheta2 = state
        d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * math.cos(theta2)) + i1 + i2
        d2 = m2 * (lc2**2 + l1 * lc2 * math.cos(theta2)) + i2
        phi2 = m2 * lc2 * g * math.cos(theta1 + theta2 - math.pi / 2)
        phi1 = (
            -m2 * l1 * lc2 * dtheta2**2 * math.sin(theta2)
            - 2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * math.sin(theta2)
            + (m1 * lc1 + m2 * l1) * g * math.cos(theta1 - math.pi / 2)
            + phi2
        )
        ddtheta2 = (
            torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1**2 * math.sin(theta2) - phi2
        ) / (m2 * lc2**2 + i2 - d2**2 / d1)
        ddtheta1 = -(d2 * ddtheta2 + phi1) / d1
        return (dtheta1, dtheta2, ddtheta1, ddtheta2)

    def integrate(self, state, torque, dt):
        """One RK4 step of the link dynamics (no wrapping or clipping)."""
        def shift(y, k, c):
            return tuple(a + c * b for a, b in zip(y, k))

        k1 = self.derivatives(state, torque)
        k2 = self.derivatives(shift(state, k1, dt / 2), torque)
        k3 = self.derivatives(shift(state, k2, dt / 2), torque)
        k4 = self.derivatives(shift(state, k3, dt), torque)
        return tuple(
            y + dt / 6 * (a + 2 * b + 2 * c + d) for y, a, b, c, d in zip(state, k1, k2, k3, k4)
        )

    def energy(self, state) -> float:
        """Total mechanical energy, zero potential at the pivot."""
        m1, m2 = self.link_mass_1, self.link_mass_2
        l1, lc1, lc2, moi = self.link_length_1, self.link_com_1, self.link_com_2, self.link_moi
        t1, t2, w1, w2 = state
        d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * math.cos(t2)) + 2 * moi
        d2 = m2 * (lc2**2 + l1 * lc2 * math.cos(t2)) + moi
        kinetic = 0.5 * d1 * w1**2 + d2 * w1 * w2 + 0.5 * (m2 * lc2**2 + moi) * w2**2
        potential = -self.g * (
            m1 * lc1 * math.cos(t1) + m2 * (l1 * math.cos(t1) + lc2 * math.cos(t1 + t2))
        )
        return kinetic + potential

    def _dynamics(self, physics, action):
        t1, t2, w1, w2 = self.integrate(physics, self.torques[action], self.dt)
        t1 = _wrap(t1)
        t2 = _wrap(t2)
        w1 = min(max(w1, -self.max_vel_1), self.max_vel_1)
        w2 = min(max(w2, -self.max_vel_2), self.max_vel_2)
        done = -math.cos(t1) - math.cos(t2 + t1) > 1.0
        return (t1, t2, w1, w2), (0.0 if done else -1.0), done


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2 * math.pi) - math.pi


ENVIRONMENTS = {"cartpole": CartPole, "mountaincar": MountainCar, "acrobot": Acrobot}


def make_env(name: str, **kwargs) -> ControlEnv:
    try:
        return ENVIRONMENTS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown environment {name!r}") from None


def control_env_step(s: ControlEnvState, action: int) -> tuple[ControlEnvState, float, bool]:
    """Step with the default configuration of ``s.env``."""
    return make_env(s.env).step(s, action)
