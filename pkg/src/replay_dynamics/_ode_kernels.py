"""Compiled RK4 for the undiscounted LineSearch metric systems.

Same right-hand sides as ``er_rhs_gamma0`` and ``_per_update`` in
``ode_model``, written per cell so long horizons and sweep grids run at
native speed. Cells are independent; the batch axis is the last one.
"""

import numpy as np
from numba import njit

UNIFORM, PRIORITIZED = 0, 1


@njit(cache=True)
def _rhs(kind, t, d1, d2, rate, N, v, x0, nodes, weights):
    n = min(t, N)
    if kind == UNIFORM:
        # window means of x^2 and x for x(t') = x0 + v t'
        a11 = rate * (n * n * v * v / 3 + x0 * x0 - n * v * x0 + (2 * v * x0 - n * v * v) * t + v * v * t * t)
        a12 = rate * (x0 - n * v / 2 + v * t)
        return -a11 * d1 - a12 * d2, -a12 * d1 - rate * d2
    mid = x0 + v * (t - n / 2)
    half = v * n / 2
    s2 = 0.0
    s3y = 0.0
    s3 = 0.0
    for i in range(nodes.shape[0]):
        y = mid + nodes[i] * half
        delta = -(d1 * y + d2)
        wd2 = weights[i] * delta * delta
        s2 += wd2
        s3 += wd2 * delta
        s3y += wd2 * delta * y
    if s2 > 0:
        return rate * s3y / s2, rate * s3 / s2
    return 0.0, 0.0


@njit(cache=True)
def rk4_metrics(kind, d0, rates, Ns, v, x0, mask, times, nodes, weights, out):
    """Fill ``out[i, :, c]`` with the state at ``times[i]``; return the failure index or -1."""
    n_cells = d0.shape[1]
    m1 = mask[0]
    m2 = mask[1]
    for c in range(n_cells):
        rate = rates[c]
        N = Ns[c]
        y1 = d0[0, c]
        y2 = d0[1, c]
        out[0, 0, c] = y1
        out[0, 1, c] = y2
        for i in range(times.shape[0] - 1):
            t = times[i]
            h = times[i + 1] - t
            k11, k12 = _rhs(kind, t, y1, y2, rate, N, v, x0, nodes, weights)
            k21, k22 = _rhs(kind, t + h / 2, y1 + h / 2 * m1 * k11, y2 + h / 2 * m2 * k12, rate, N, v, x0, nodes, weights)
            k31, k32 = _rhs(kind, t + h / 2, y1 + h / 2 * m1 * k21, y2 + h / 2 * m2 * k22, rate, N, v, x0, nodes, weights)
            k41, k42 = _rhs(kind, t + h, y1 + h * m1 * k31, y2 + h * m2 * k32, rate, N, v, x0, nodes, weights)
            y1 = y1 + h / 6 * m1 * (k11 + 2 * k21 + 2 * k31 + k41)
            y2 = y2 + h / 6 * m2 * (k12 + 2 * k22 + 2 * k32 + k42)
            if not (np.isfinite(y1) and np.isfinite(y2)):
                return i
            out[i + 1, 0, c] = y1
            out[i + 1, 1, c] = y2
    return -1
