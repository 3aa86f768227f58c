"""LineSearch: a one-dimensional game with a linear reward and two actions.

The agent's value function is linear in the post-action position,
``Q(x, a; theta) = theta1 * (x + a) + theta2``, which matches the shape of the
true action-value function exactly (no model mismatch). Learning progress is
tracked through the weight differences ``theta - beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class TrueWeights:
    """Weights of the environment's reward ``r(x) = beta1 * x + beta2``."""

    beta1: float = 0.1
    beta2: float = 0.5

    def __post_init__(self) -> None:
        _check_finite(beta1=self.beta1, beta2=self.beta2)
        if self.beta1 == 0:
            raise ValueError("beta1 must be nonzero")


@dataclass(frozen=True)
class LinearTheta:
    theta1: float
    theta2: float

    def __post_init__(self) -> None:
        _check_finite(theta1=self.theta1, theta2=self.theta2)

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2])


@dataclass(frozen=True)
class LineSearchConfig:
    weights: TrueWeights = TrueWeights()
    v: float = 0.01
    x0: float = -5.0
    gamma: float = 0.0
    horizon: int = 1000

    def __post_init__(self) -> None:
        _check_finite(v=self.v, x0=self.x0, gamma=self.gamma)
        if self.v <= 0:
            raise ValueError(f"v must be positive, got {self.v}")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon}")


@dataclass(frozen=True)
class Transition:
    """One stored experience.

    ``x`` and ``x_next`` are floats for LineSearch and 1-D arrays for the
    control environments, where ``a`` is an action index. A transition whose
    fields are arrays stands for a batch (see ``ReplayBuffer.view``).
    """

    x: Any
    a: Any
    r: float
    x_next: Any
    terminal: bool = False

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.r)):
            raise ValueError(f"reward must be finite, got {self.r!r}")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.x_next))):
            raise ValueError("states must be finite")


class MetricPair(NamedTuple):
    d1: float
    d2: float


def reward(config: LineSearchConfig, x: float) -> float:
    return config.weights.beta1 * x + config.weights.beta2


def env_step(config: LineSearchConfig, x: float, a: float) -> Transition:
    """Move by ``a`` and collect the reward of the state reached."""
    if a != config.v and a != -config.v:
        raise ValueError(f"action must be +/-{config.v}, got {a}")
    x_next = x + a
    return Transition(x=x, a=a, r=reward(config, x_next), x_next=x_next)


def q_value(theta: LinearTheta, x: float, a: float) -> float:
    return theta.theta1 * (x + a) + theta.theta2


def greedy_action(theta: LinearTheta, v: float) -> float:
    # theta1 == 0 breaks the tie towards +v
    return -v if theta.theta1 < 0 else v


def td_error(theta: LinearTheta, t: Transition, gamma: float) -> float:
    """Bellman residual of one transition under ``theta``.

    The bootstrap term maximises over both actions explicitly; the action
    magnitude is recovered from the stored action.
    """
    target = t.r
    if gamma:
        v = np.abs(t.a)
        best = np.maximum(q_value(theta, t.x_next, v), q_value(theta, t.x_next, -v))
        target = target + gamma * np.where(t.terminal, 0.0, best)
    delta = target - q_value(theta, t.x, t.a)
    return float(delta) if np.ndim(delta) == 0 else delta


def td_update(theta: LinearTheta, t: Transition, alpha: float, gamma: float) -> LinearTheta:
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    delta = td_error(theta, t, gamma)
    return LinearTheta(
        theta.theta1 + alpha * delta * (t.x + t.a),
        theta.theta2 + alpha * delta,
    )


def metrics(theta: LinearTheta, beta: TrueWeights) -> MetricPair:
    return MetricPair(theta.theta1 - beta.beta1, theta.theta2 - beta.beta2)


def measure_M(d1_final: float, d2_final: float) -> float:
    """Final absolute metric sum; lower means the value function is closer."""
    return abs(d1_final) + abs(d2_final)


def stationary_weights(beta: TrueWeights, v: float, gamma: float) -> LinearTheta:
    """Weights at which the discounted TD error vanishes on a greedy trajectory."""
    g = 1.0 - gamma
    return LinearTheta(beta.beta1 / g, beta.beta2 / g + gamma * v * abs(beta.beta1) / g**2)
