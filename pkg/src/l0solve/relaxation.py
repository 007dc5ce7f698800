"""Convex relaxation of ``g(x) = h(x) + lmbd * (x != 0)``.

Inside a node, each coordinate is either fixed to zero, fixed to nonzero, or
free; its term in the objective is respectively the indicator of ``{0}``,
``h + lmbd``, or ``g``. The lower bounding problem replaces ``g`` by its convex
envelope ``g**``. The functions below evaluate these relaxed terms, their
conjugates, subdifferentials and proximal operators one coordinate at a time.
"""

import math
from enum import IntEnum

import numpy as np

from l0solve import _backend
from l0solve import _kernels as K
from l0solve.penalties import BasePenalty, Interval, PenaltyParams, penalty_params


class CoordStatus(IntEnum):
    ZERO = K.ZERO
    NONZERO = K.NONZERO
    FREE = K.FREE


_EMPTY6 = (np.zeros(0),) * 6


def _setup(pen, lmbd, i, params):
    if params is None:
        params = penalty_params(pen, i, lmbd)
    ns = _backend.kernels_for(None, pen)
    ctx = _backend.context(None, None, pen, lmbd, _EMPTY6)
    return ns, ctx, params.as_tuple()


def g_value(pen: BasePenalty, lmbd: float, i: int, x: float) -> float:
    return pen.value(i, x) + (lmbd if x != 0.0 else 0.0)


def g_conjugate(pen: BasePenalty, lmbd: float, i: int, v: float) -> float:
    """``g*(v) = max(h*(v) - lmbd, 0)``."""
    return max(pen.conjugate(i, v) - lmbd, 0.0)


def g_biconjugate(pen, lmbd, i, x, params: PenaltyParams | None = None) -> float:
    return relaxed_term(CoordStatus.FREE, pen, lmbd, i, x, params)


def g_biconjugate_subdiff(pen, lmbd, i, x, params: PenaltyParams | None = None) -> Interval:
    return relaxed_subdiff(CoordStatus.FREE, pen, lmbd, i, x, params)


def g_biconjugate_prox(pen, lmbd, i, v, eta, params: PenaltyParams | None = None) -> float:
    """``argmin_x (x - v)^2 / 2 + eta * g**(x)``."""
    return relaxed_prox(CoordStatus.FREE, pen, lmbd, i, v, eta, params)


def relaxed_term(status, pen, lmbd, i, x, params=None) -> float:
    ns, ctx, par = _setup(pen, lmbd, i, params)
    return float(ns.rel_value(ctx, int(status), i, float(x), par))


def relaxed_term_conjugate(status, pen, lmbd, i, v) -> float:
    ns, ctx, _ = _setup(pen, lmbd, i, _DUMMY)
    return float(ns.rel_conj(ctx, int(status), i, float(v)))


def relaxed_prox(status, pen, lmbd, i, v, eta, params=None) -> float:
    if not eta > 0.0:
        raise ValueError("`eta` must be positive")
    ns, ctx, par = _setup(pen, lmbd, i, params)
    return float(ns.rel_prox(ctx, int(status), i, float(v), float(eta), par))


def relaxed_subdiff(status, pen, lmbd, i, x, params=None) -> Interval:
    ns, ctx, par = _setup(pen, lmbd, i, params)
    return Interval(*ns.rel_subdiff(ctx, int(status), i, float(x), par))


_DUMMY = PenaltyParams(*(math.nan,) * 6)
