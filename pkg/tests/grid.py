"""Grid-based numerical oracles for scalar conjugates."""

import math

import numpy as np


def concave_sup(fun, lo, hi, num=401, rounds=9):
    """Supremum of a concave extended-real function on ``[lo, hi]``.

    A dense grid locates the maximizer, which is then refined on successively
    narrower grids around it. Points where ``fun`` is not finite count as
    ``-inf``.
    """
    best = -math.inf
    for _ in range(rounds):
        t = np.linspace(lo, hi, num)
        vals = np.array([fun(ti) for ti in t], dtype=float)
        vals[~np.isfinite(vals)] = -math.inf
        k = int(np.argmax(vals))
        best = max(best, float(vals[k]))
        if best == -math.inf:
            return best
        step = t[1] - t[0]
        lo, hi = max(lo, t[k] - 2 * step), min(hi, t[k] + 2 * step)
    return best


def grid_g_conjugate(pen, lmbd, v, xmax=50.0):
    """``sup_x v x - h(x) - lmbd * (x != 0)`` by grid search on each half-line."""
    best = 0.0  # x = 0
    for side in (-1.0, 1.0):
        val = concave_sup(lambda x: side * v * x - pen.value(0, side * x) - lmbd, 0.0, xmax)
        best = max(best, val)
    return best


def grid_biconjugate(gconj, x, vmax):
    """``sup_v x v - gconj(v)`` over ``|v| <= vmax``."""
    return concave_sup(lambda v: x * v - gconj(v), -vmax, vmax)
