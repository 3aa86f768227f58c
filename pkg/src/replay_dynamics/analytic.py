"""Closed-form and asymptotic LineSearch solutions for gamma = 0.

These are the oracles the ODE integrator and the simulated agents are
checked against. All time arguments broadcast over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linesearch import MetricPair
from .ode_model import OdeSolution


@dataclass(frozen=True)
class AnalyticParams:
    m: float = 5
    alpha: float = 0.01
    N: float = 100
    v: float = 0.01
    x0: float = -5.0
    d1_0: float = -0.1
    d2_0: float = 0.5

    def __post_init__(self) -> None:
        if self.m < 1 or self.alpha <= 0 or self.N < 1 or self.v <= 0:
            raise ValueError(f"invalid parameters: {self}")
        if not (math.isfinite(self.d1_0) and math.isfinite(self.d2_0)):
            raise ValueError("initial metrics must be finite")

    @property
    def rate(self) -> float:
        return self.m * self.alpha


@dataclass(frozen=True)
class StageEstimate:
    d1_1: float
    d2_1: float


# -- one-dimensional solutions -------------------------------------------------


def _k_filling(t, p: AnalyticParams):
    v, x0 = p.v, p.x0
    return p.rate * (v**2 / 9 * t**3 + x0 * v / 2 * t**2 + x0**2 * t)


def _k_sliding(t, p: AnalyticParams):
    v, x0, N = p.v, p.x0, p.N
    return p.rate * (
        v**2 / 3 * t**3
        + v * (2 * x0 - N * v) / 2 * t**2
        + (x0**2 - N * v * x0 + N**2 * v**2 / 3) * t
        - N**2 * v * (N * v - 9 * x0) / 18
    )


def exponent_k(t, p: AnalyticParams):
    """Decay exponent of the slope metric when the intercept is pinned.

    Cubic in ``t`` on each side of ``t = N`` (buffer filling, then sliding).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    out = np.where(t <= p.N, _k_filling(t, p), _k_sliding(t, p))
    return float(out) if out.ndim == 0 else out


def fixed_intercept_solution(t, p: AnalyticParams):
    return p.d1_0 * np.exp(-exponent_k(t, p))


def fixed_slope_solution(t, p: AnalyticParams):
    # independent of N, v and x0: every transition is equally informative
    return p.d2_0 * np.exp(-p.rate * np.asarray(t, dtype=float))


# -- two-dimensional stage approximations --------------------------------------


def beginning_stage(t, p: AnalyticParams) -> MetricPair:
    """Early-time metrics while the agent is still near ``x0``."""
    x0, d1, d2 = p.x0, p.d1_0, p.d2_0
    e = np.exp(-p.rate * np.asarray(t, dtype=float) * (x0**2 + 1))
    den = x0**2 + 1
    return MetricPair(
        (d1 + d1 * x0**2 * e - d2 * x0 + d2 * x0 * e) / den,
        (d1 * x0 * e + d2 * e + d2 * x0**2 - d1 * x0) / den,
    )


def beginning_plateau(p: AnalyticParams) -> MetricPair:
    x0, d1, d2 = p.x0, p.d1_0, p.d2_0
    s = (d2 + d1 * x0) / (x0**2 + 1)
    return MetricPair(d1 - x0 * s, d2 - s)


def _last_stage_scale(p: AnalyticParams, s: StageEstimate) -> float:
    return 3 ** (2 / 3) * s.d1_1 * (p.rate * p.v**2) ** (1 / 3) / (3 * p.v)


def last_stage(t, p: AnalyticParams, s: StageEstimate) -> MetricPair:
    """Late-time metrics: cubic-exponent decay of d1 feeding a frozen-out d2."""
    t = np.asarray(t, dtype=float)
    c = p.rate * p.v**2 / 3
    d1 = s.d1_1 * np.exp(-c * t**3)
    tail = np.vectorize(upper_incomplete_gamma)(2 / 3, c * t**3)
    d2 = s.d2_1 - _last_stage_scale(p, s) * (math.gamma(2 / 3) - tail)
    if d2.ndim == 0:
        return MetricPair(float(d1), float(d2))
    return MetricPair(d1, d2)


def last_plateau(p: AnalyticParams, s: StageEstimate) -> float:
    """Limit of d2 in the last stage; nonzero unless d1 has already vanished."""
    return s.d2_1 - _last_stage_scale(p, s) * math.gamma(2 / 3)


# -- second-order formulation ------------------------------------------------------


@dataclass(frozen=True)
class SecondOrderCoeffs:
    """Coefficients of ``D d1'' + C1(t) d1' + C0(t) d1 = 0`` (polynomials in t).

    ``c0``/``c1``/``d`` hold the filling-buffer regime (t <= N), ``g0``/``g1``/``h``
    the sliding regime (t >= N); each tuple lists ascending powers of t.
    """

    c0: tuple[float, float, float, float]
    c1: tuple[float, float, float, float]
    d: tuple[float, float]
    g0: tuple[float, float, float]
    g1: tuple[float, float, float, float]
    h: tuple[float, float]

    def regime(self, late: bool):
        return (self.g0, self.g1, self.h) if late else (self.c0, self.c1, self.d)


def second_order_coeffs(p: AnalyticParams) -> SecondOrderCoeffs:
    """Coefficients from eliminating d2 out of the first-order metric system."""
    a, m, v, x0, N = p.alpha, p.m, p.v, p.x0, p.N
    am = a * m
    c0 = (
        12 * am * v * x0**2,
        16 * am * v**2 * x0,
        2 * am**2 * v**2 * x0 + 4 * am * v**3,
        am**2 * v**3,
    )
    c1 = (
        24 * am * x0**3 + 24 * am * x0 - 12 * v,
        12 * am * v + 36 * am * v * x0**2,
        20 * am * v**2 * x0,
        4 * am * v**3,
    )
    d = (24 * x0, 12 * v)
    g0 = (
        am * v * (N**2 * v**2 * (4 - am * N) + 2 * N * v * x0 * (am * N - 12) + 24 * x0**2),
        2 * am * v**2 * (N * v * (am * N - 12) + 24 * x0),
        24 * am * v**3,
    )
    g1 = (
        -4 * (v * (am * N * (N**2 * v**2 + 3) + 6) - am * x0 * (5 * N**2 * v**2 + 6)
              + 9 * am * N * v * x0**2 - 6 * am * x0**3),
        4 * am * v * (5 * N**2 * v**2 - 18 * N * v * x0 + 18 * x0**2 + 6),
        -36 * am * v**2 * (N * v - 2 * x0),
        24 * am * v**3,
    )
    h = (24 * x0 - 12 * N * v, 24 * v)
    return SecondOrderCoeffs(c0, c1, d, g0, g1, h)


def second_order_residual(sol: OdeSolution, p: AnalyticParams, late: bool = False) -> float:
    """Sup-norm residual of the second-order d1 equation along ``sol``.

    Derivatives come from central differences on the (uniform) solution
    grid; the first and last grid points are skipped. Only interior times
    with ``1 <= t <= N - 1`` are used, or ``t >= N + 1`` when ``late``.
    """
    t, y = sol.times, np.asarray(sol.d1)
    h = t[1] - t[0]
    tc = t[1:-1]
    dy = (y[2:] - y[:-2]) / (2 * h)
    ddy = (y[2:] - 2 * y[1:-1] + y[:-2]) / h**2
    q0, q1, den = (np.polynomial.polynomial.polyval(tc, c) for c in _regime_polys(p, late))
    mask = (tc >= p.N + 1) if late else ((tc >= 1) & (tc <= p.N - 1))
    if not mask.any():
        return 0.0
    res = ddy + (q1 * dy + q0 * y[1:-1]) / den
    return float(np.max(np.abs(res[mask])))


def _regime_polys(p: AnalyticParams, late: bool):
    c0, c1, d = second_order_coeffs(p).regime(late)
    return c0, c1, d


# -- special functions -----------------------------------------------------------


def upper_incomplete_gamma(s: float, x: float) -> float:
    """``Gamma(s, x) = integral_x^inf u^(s-1) e^-u du`` for ``s > 0``, ``x >= 0``.

    Power series for the lower part when ``x < s + 1``, otherwise a modified
    Lentz continued fraction.
    """
    if not (s > 0 and x >= 0) or not (math.isfinite(s) and math.isfinite(x)):
        raise ValueError(f"need s > 0 and x >= 0, got s={s}, x={x}")
    if x == 0:
        return math.gamma(s)
    if x < s + 1:
        return math.gamma(s) - _lower_series(s, x)
    return _upper_fraction(s, x)


def _lower_series(s: float, x: float) -> float:
    term = total = 1.0 / s
    a = s
    for _ in range(10_000):
        a += 1
        term *= x / a
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + s * math.log(x))


def _upper_fraction(s: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1 - s
    c = 1 / tiny
    d = 1 / b
    f = d
    for i in range(1, 10_000):
        an = -i * (i - s)
        b += 2
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1 / d
        delta = d * c
        f *= delta
        if abs(delta - 1) < 1e-16:
            break
    return f * math.exp(-x + s * math.log(x))
