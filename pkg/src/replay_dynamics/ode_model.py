"""Mean-field ODE model of TD learning with a replay memory.

Time ``t`` is the continuous interpolation of the learning step. The memory
window at time ``t`` covers ``[t - n(t), t]`` with ``n(t) = min(t, N)``, i.e.
the buffer fills up during the first ``N`` steps and then slides.

The LineSearch right-hand sides assume the greedy agent moves right
(``theta1 > 0``), so the visited positions are ``x(t') = x0 + v t'``. All of
them broadcast over array-valued ``m``, ``alpha`` and ``N`` so a whole sweep
grid integrates as one vector ODE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import _ode_kernels
from .linesearch import LinearTheta, TrueWeights, stationary_weights

DEFAULT_STEP = 0.1

# 3-point Gauss-Legendre is exact for the degree-4 window integrands used here
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(3)


class IntegrationError(RuntimeError):
    def __init__(self, t: float, message: str = "non-finite derivative"):
        super().__init__(f"{message} at t={t:.6g}")
        self.t = t


@dataclass(frozen=True)
class OdeParams:
    m: float = 5
    alpha: float = 0.01
    N: float = 100
    v: float = 0.01
    x0: float = -5.0
    gamma: float = 0.0
    beta: TrueWeights = TrueWeights()

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.m) < 1):
            raise ValueError("m must be >= 1")
        if np.any(np.asarray(self.alpha) <= 0):
            raise ValueError("alpha must be positive")
        if np.any(np.asarray(self.N) < 1):
            raise ValueError("N must be >= 1")
        if self.v <= 0:
            raise ValueError("v must be positive")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")

    @property
    def rate(self):
        if np.ndim(self.m) == 0 and np.ndim(self.alpha) == 0:
            return float(self.m) * float(self.alpha)  # plain floats keep scalar RK4 loops fast
        return np.asarray(self.m) * np.asarray(self.alpha)

    def target(self) -> LinearTheta:
        """Weights the agent should learn (the true weights when gamma = 0)."""
        return stationary_weights(self.beta, self.v, self.gamma)


@dataclass(frozen=True)
class OdeSolution:
    """Trajectory sampled on ``times``; ``values[i]`` is the state at ``times[i]``.

    For the LineSearch drivers the state is the metric pair ``(d1, d2)``
    (one column per sweep cell when batched); ``offset`` holds the target
    weights so raw weights are ``values + offset``.
    """

    times: np.ndarray
    values: np.ndarray
    offset: tuple[float, float] = (0.0, 0.0)

    @property
    def d1(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def d2(self) -> np.ndarray:
        return self.values[:, 1]

    @property
    def theta1(self) -> np.ndarray:
        return self.d1 + self.offset[0]

    @property
    def theta2(self) -> np.ndarray:
        return self.d2 + self.offset[1]

    def at(self, t: float) -> np.ndarray:
        """State at the grid time nearest to ``t``."""
        i = int(np.argmin(np.abs(self.times - t)))
        return self.values[i]


# -- integrator --------------------------------------------------------------


def _time_grid(t0: float, t1: float, h: float) -> np.ndarray:
    """Multiples of ``h`` from ``t0``, with a final short step landing on ``t1``."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got t0={t0}, t1={t1}")
    n_full = int(math.floor((t1 - t0) / h * (1 + 1e-12)))
    times = t0 + h * np.arange(n_full + 1)
    if t1 - times[-1] > 1e-9 * h:
        times = np.append(times, t1)
    else:
        times[-1] = t1
    return times


def rk4_integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0,
    t0: float,
    t1: float,
    h: float = DEFAULT_STEP,
) -> OdeSolution:
    """Classical fixed-step RK4, sampled every ``h``; the last step lands on ``t1``."""
    times = _time_grid(t0, t1, h)
    y = np.array(y0, dtype=float)
    out = np.empty((len(times), *y.shape))
    out[0] = y
    for i in range(len(times) - 1):
        t = times[i]
        dt = times[i + 1] - t
        k1 = rhs(t, y)
        k2 = rhs(t + dt / 2, y + dt / 2 * k1)
        k3 = rhs(t + dt / 2, y + dt / 2 * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(t)
        out[i + 1] = y
    return OdeSolution(times, out)


# -- LineSearch dynamics -----------------------------------------------------


class CoeffSetB(NamedTuple):
    b10: float
    b11: float
    b12: float
    b20: float
    b21: float
    b22: float


def effective_size(t, N):
    if np.ndim(t) == 0 and np.ndim(N) == 0:
        return float(min(t, N))
    return np.minimum(t, N)


def coeffs_b(params: OdeParams, n) -> CoeffSetB:
    """Polynomial-in-t window averages of the features, scaled by m*alpha.

    ``b10 + b11 t + b12 t^2`` is the window mean of ``x(t')^2`` and
    ``(b20 + b21 t)`` the mean of ``x(t')``.
    """
    ma, v, x0 = params.rate, params.v, params.x0
    n = float(n) if np.ndim(n) == 0 else np.asarray(n, dtype=float)
    return CoeffSetB(
        b10=ma * (n**2 * v**2 / 3 + x0**2 - n * v * x0),
        b11=ma * (2 * v * x0 - n * v**2),
        b12=ma * v**2 + 0 * n,
        b20=ma * (x0 - n * v / 2),
        b21=ma * v + 0 * n,
        b22=ma + 0 * n,
    )


def _window_moments(t, params: OdeParams):
    b = coeffs_b(params, effective_size(t, params.N))
    return b.b10 + b.b11 * t + b.b12 * t**2, b.b20 + b.b21 * t, b.b22


def er_rhs_gamma0(t, d, params: OdeParams) -> np.ndarray:
    """Metric derivatives for uniform replay with no discounting."""
    d1, d2 = d[0], d[1]
    a11, a12, a22 = _window_moments(t, params)
    return np.array([-a11 * d1 - a12 * d2, -a12 * d1 - a22 * d2])


def _brackets(theta, params: OdeParams):
    """Return ``(A, B)`` with TD error ``delta(y) = -(A y + B)`` at position ``y``."""
    g = params.gamma
    th1, th2 = theta[0], theta[1]
    return (
        (1 - g) * th1 - params.beta.beta1,
        (1 - g) * th2 - g * params.v * np.abs(th1) - params.beta.beta2,
    )


def er_rhs_gamma(t, theta, params: OdeParams) -> np.ndarray:
    """Weight derivatives for uniform replay with discount ``gamma``."""
    a11, a12, a22 = _window_moments(t, params)
    A, B = _brackets(theta, params)
    return np.array([-a11 * A - a12 * B, -a12 * A - a22 * B])


def _window_nodes(t, params: OdeParams) -> np.ndarray:
    n = effective_size(t, params.N)
    mid = params.x0 + params.v * (t - n / 2)
    half = params.v * n / 2
    return mid + np.multiply.outer(_GL_NODES, half)


def per_rhs_linesearch(t, theta, params: OdeParams) -> np.ndarray:
    """Weight derivatives for prioritized replay (exponent 2), closed window.

    The window integrals are polynomial in ``t'`` and evaluated exactly with
    Gauss-Legendre nodes; the window length cancels in the ratio, so the
    ``n -> 0`` limit is the instantaneous TD update.
    """
    A, B = _brackets(theta, params)
    return _per_update(t, A, B, params)


def _per_update(t, A, B, params: OdeParams) -> np.ndarray:
    y = _window_nodes(t, params)
    w = _GL_WEIGHTS.reshape((-1,) + (1,) * (y.ndim - 1))
    delta = -(A * y + B)
    d2 = np.sum(w * delta**2, axis=0)
    d3 = w * delta**3
    num = np.array([np.sum(d3 * y, axis=0), np.sum(d3, axis=0)])
    safe = np.where(d2 > 0, d2, 1.0)
    return np.where(d2 > 0, params.rate * num / safe, 0.0)


def er_rhs_window_exact(t, theta, params: OdeParams) -> np.ndarray:
    """Uniform-replay counterpart of ``per_rhs_linesearch`` (same quadrature)."""
    A, B = _brackets(theta, params)
    y = _window_nodes(t, params)
    w = _GL_WEIGHTS.reshape((-1,) + (1,) * (y.ndim - 1))
    delta = -(A * y + B)
    return params.rate * np.array([np.sum(w * delta * y, axis=0), np.sum(w * delta, axis=0)]) / 2.0


def _compiled_metrics(params: OdeParams, d0, T: float, h: float, replay: str, frozen: int | None = None):
    """RK4 of the undiscounted metric system in compiled code; one column per cell."""
    kind = {"er": _ode_kernels.UNIFORM, "per": _ode_kernels.PRIORITIZED}.get(replay)
    if kind is None:
        raise ValueError(f"unknown replay scheme {replay!r}")
    shape = np.broadcast(params.rate, np.asarray(params.N)).shape
    rates = np.broadcast_to(params.rate, shape).astype(float).ravel()
    Ns = np.broadcast_to(np.asarray(params.N, dtype=float), shape).ravel()
    y0 = np.broadcast_to(np.asarray(d0, dtype=float).reshape((2,) + (1,) * len(shape)), (2, *shape))
    y0 = np.ascontiguousarray(y0.reshape(2, -1))
    mask = np.ones(2)
    if frozen is not None:
        mask[frozen] = 0.0
    times = _time_grid(0.0, T, h)
    out = np.empty((len(times), 2, rates.size))
    failed = _ode_kernels.rk4_metrics(
        kind, y0, rates, Ns, float(params.v), float(params.x0), mask, times, _GL_NODES, _GL_WEIGHTS, out
    )
    if failed >= 0:
        raise IntegrationError(times[failed])
    return times, out.reshape((len(times), 2, *shape))


def integrate_linesearch(
    params: OdeParams,
    d0=(-0.1, 0.5),
    T: float = 1000.0,
    h: float = DEFAULT_STEP,
    replay: str = "er",
) -> OdeSolution:
    """Theory curve for LineSearch starting from initial metrics ``d0``.

    ``replay`` is ``"er"`` (uniform) or ``"per"`` (prioritized, exponent 2).
    Metrics are measured against ``params.target()``, which equals the true
    weights when ``gamma = 0``. Broadcasting ``d0`` or the parameters over an
    extra axis integrates many configurations at once.
    """
    target = params.target()
    offset = np.array([target.theta1, target.theta2])
    if params.gamma == 0:
        # brackets are the metrics themselves; same system as er_rhs_gamma0 / per_rhs_linesearch
        times, values = _compiled_metrics(params, d0, T, h, replay)
        return OdeSolution(times, values, tuple(offset))
    shape = np.broadcast(params.rate, np.asarray(params.N)).shape
    d0 = np.broadcast_to(np.asarray(d0, dtype=float).reshape((2,) + (1,) * len(shape)), (2, *shape))
    if replay == "er":
        rhs = er_rhs_gamma
    elif replay == "per":
        rhs = per_rhs_linesearch
    else:
        raise ValueError(f"unknown replay scheme {replay!r}")
    off = offset.reshape((2,) + (1,) * len(shape))
    sol = rk4_integrate(lambda t, th: rhs(t, th, params), d0 + off, 0.0, T, h)
    return OdeSolution(sol.times, sol.values - off, tuple(offset))


def integrate_pinned(
    params: OdeParams,
    d0=(-0.1, 0.5),
    pinned: str = "intercept",
    T: float = 1000.0,
    h: float = DEFAULT_STEP,
    replay: str = "er",
) -> OdeSolution:
    """Integrate with one weight held fixed at its initial value.

    ``pinned="intercept"`` freezes theta2 so only the slope learns (the 1D
    slope problem); ``pinned="slope"`` freezes theta1. Requires ``gamma = 0``
    so the frozen metric stays meaningful.
    """
    if params.gamma != 0:
        raise ValueError("pinned integration is defined for gamma = 0")
    frozen = {"intercept": 1, "slope": 0}.get(pinned)
    if frozen is None:
        raise ValueError(f"pinned must be 'intercept' or 'slope', got {pinned!r}")
    # with gamma = 0 the brackets are the metrics themselves, so integrate
    # metrics directly and keep full relative precision near zero
    times, values = _compiled_metrics(params, d0, T, h, replay, frozen)
    return OdeSolution(times, values, (params.beta.beta1, params.beta.beta2))


# -- generic history-based window model -------------------------------------


def state_derivative(x: float, theta, params: OdeParams, epsilon: float = 0.0) -> float:
    """Drift of the LineSearch position under a greedy or epsilon-greedy policy.

    Random actions average to zero drift since ``+v`` and ``-v`` are
    equally likely; ``theta1 == 0`` counts as moving right.
    """
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    th1 = theta.theta1 if isinstance(theta, LinearTheta) else theta[0]
    sign = -1.0 if th1 < 0 else 1.0
    return (1 - epsilon) * sign * params.v


@dataclass
class History:
    """Visited positions ``x(t')`` on a time grid, extrapolated linearly past the end."""

    capacity: int
    times: np.ndarray = field(init=False)
    x: np.ndarray = field(init=False)
    a: np.ndarray = field(init=False)
    size: int = 0

    def __post_init__(self) -> None:
        self.times = np.empty(self.capacity)
        self.x = np.empty(self.capacity)
        self.a = np.empty(self.capacity)

    def append(self, t: float, x: float, dxdt: float) -> None:
        self.times[self.size] = t
        self.x[self.size] = x
        self.a[self.size] = dxdt
        self.size += 1

    def position(self, t):
        i = self.size - 1
        return self.x[i] + self.a[i] * (t - self.times[i])

    def window(self, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature points ``(t', x(t'))`` covering ``[lo, hi]`` inclusive."""
        ts = self.times[: self.size]
        i0 = np.searchsorted(ts, lo, side="right")
        i1 = np.searchsorted(ts, hi, side="left")
        inner_t = ts[i0:i1]
        inner_x = self.x[i0:i1]

        def at(t):
            if t <= ts[-1]:
                return np.interp(t, ts, self.x[: self.size])
            return self.position(t)

        return (
            np.concatenate(([lo], inner_t, [hi])),
            np.concatenate(([at(lo)], inner_x, [at(hi)])),
        )


def _td_along(theta, y, params: OdeParams) -> np.ndarray:
    """TD error of the transition landing at ``y`` (continuous limit)."""
    th1, th2 = theta[0], theta[1]
    r = params.beta.beta1 * y + params.beta.beta2
    q = th1 * y + th2
    bootstrap = np.maximum(th1 * (y + params.v), th1 * (y - params.v)) + th2
    return r + params.gamma * bootstrap - q


def memory_window_rhs(t: float, theta, history: History, params: OdeParams) -> np.ndarray:
    """Expected TD update over the memory window by trapezoid quadrature."""
    if history.size == 0:
        raise ValueError("empty history")
    n = float(effective_size(t, params.N))
    if n <= 0:
        y = history.position(t)
        return params.rate * _td_along(theta, y, params) * np.array([y, 1.0])
    ts, y = history.window(t - n, t)
    delta = _td_along(theta, y, params)
    return params.rate / n * np.array([np.trapezoid(delta * y, ts), np.trapezoid(delta, ts)])


def per_rhs(t: float, theta, history: History, params: OdeParams) -> np.ndarray:
    """Prioritized (exponent 2) expected update; zero when the window has no TD error."""
    if history.size == 0:
        raise ValueError("empty history")
    n = float(effective_size(t, params.N))
    if n <= 0:
        y = history.position(t)
        return params.rate * _td_along(theta, y, params) * np.array([y, 1.0])
    ts, y = history.window(t - n, t)
    delta = _td_along(theta, y, params)
    den = np.trapezoid(delta**2, ts)
    if not den > 0:
        return np.zeros(2)
    d3 = delta**3
    return params.rate * np.array([np.trapezoid(d3 * y, ts), np.trapezoid(d3, ts)]) / den


def integrate_memory_window(
    params: OdeParams,
    d0=(-0.1, 0.5),
    T: float = 1000.0,
    h: float = DEFAULT_STEP,
    prioritized: bool = False,
    epsilon: float = 0.0,
) -> OdeSolution:
    """Integrate weights and position jointly, recording the visited positions.

    The position moves with ``state_derivative`` evaluated at the start of
    each step; quadrature windows reach into the current step by linear
    extrapolation.
    """
    rhs = per_rhs if prioritized else memory_window_rhs
    target = params.target()
    offset = np.array([target.theta1, target.theta2])
    steps = int(round(T / h))
    history = History(steps + 2)
    theta = np.asarray(d0, dtype=float) + offset
    x = params.x0
    times = h * np.arange(steps + 1)
    out = np.empty((steps + 1, 2))
    out[0] = theta - offset
    for i in range(steps):
        t = times[i]
        dxdt = state_derivative(x, theta, params, epsilon)
        history.append(t, x, dxdt)
        f = lambda tt, th: rhs(tt, th, history, params)  # noqa: E731
        k1 = f(t, theta)
        k2 = f(t + h / 2, theta + h / 2 * k1)
        k3 = f(t + h / 2, theta + h / 2 * k2)
        k4 = f(t + h, theta + h * k3)
        theta = theta + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(theta)):
            raise IntegrationError(t)
        x = x + dxdt * h
        out[i + 1] = theta - offset
    return OdeSolution(times, out, tuple(offset))
