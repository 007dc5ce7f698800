"""Penalty functions ``h`` and the parameters of their l0-relaxation.

For a penalty ``h`` and a weight ``lmbd``, the convex envelope of
``h(x) + lmbd * (x != 0)`` is piecewise: linear with slope ``tau_pos`` on
``[0, mu_pos]`` (``tau_neg`` on ``[mu_neg, 0]``), and equal to ``h + lmbd``
beyond. ``kappa_pos`` is the right slope of ``h`` at ``mu_pos``. These six
numbers are computed in closed form for the native penalties and numerically
otherwise.
"""

import math
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass

import numpy as np

from l0solve import _kernels as K

INF = math.inf


class InconsistentPenalty(ValueError):
    """Raised when a penalty breaks the assumptions the solver relies on."""


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` of extended reals.

    The empty set is encoded by ``lo > hi`` (see :data:`EMPTY`).
    """

    lo: float
    hi: float

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi

    def __contains__(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    def interior_contains(self, lo: float, hi: float) -> bool:
        """Whether ``[lo, hi]`` lies in the interior of the interval."""
        return self.lo < lo and hi < self.hi

    def __iter__(self):
        yield self.lo
        yield self.hi


EMPTY = Interval(INF, -INF)


@dataclass(frozen=True)
class PenaltyParams:
    """Relaxation parameters of one coordinate."""

    tau_neg: float
    tau_pos: float
    mu_neg: float
    mu_pos: float
    kappa_neg: float
    kappa_pos: float

    def as_tuple(self) -> tuple:
        return (self.tau_neg, self.tau_pos, self.mu_neg, self.mu_pos, self.kappa_neg, self.kappa_pos)


class BasePenalty(metaclass=ABCMeta):
    """Base class for penalties.

    A penalty must satisfy ``h(x) >= h(0) = 0``, take finite values at some
    positive point, and be closed, convex and coercive. Subclasses implement
    the five methods below; every method receives the coordinate index so that
    a penalty may vary across coordinates.

    Closed forms for the relaxation parameters can be supplied by overriding
    :meth:`param_slope`, :meth:`param_limit` and :meth:`param_bndry`; when they
    return ``None`` the parameters are derived numerically.
    """

    #: Whether ``h`` is even. Even penalties only need the positive-side
    #: parameters, the negative ones follow by symmetry.
    symmetric: bool = False

    @abstractmethod
    def value(self, i: int, x: float) -> float:
        ...

    @abstractmethod
    def conjugate(self, i: int, v: float) -> float:
        ...

    @abstractmethod
    def prox(self, i: int, v: float, eta: float) -> float:
        """``argmin_x (x - v)^2 / 2 + eta * h(x)``."""
        ...

    @abstractmethod
    def subdiff(self, i: int, x: float) -> Interval:
        ...

    @abstractmethod
    def conjugate_subdiff(self, i: int, v: float) -> Interval:
        ...

    def param_slope(self, i: int, lmbd: float) -> tuple[float, float] | None:
        return None

    def param_limit(self, i: int, lmbd: float) -> tuple[float, float] | None:
        return None

    def param_bndry(self, i: int, lmbd: float) -> tuple[float, float] | None:
        return None

    def __str__(self) -> str:
        return type(self).__name__


class _NativePenalty(BasePenalty):
    code: int = K.CUSTOM
    M = alpha = beta = x_lb = x_ub = 0.0

    def _data(self):
        data = self.__dict__.get("_data_cache")
        if data is None:
            data = self.__dict__["_data_cache"] = (self.pparams, int(self.code), K._E1, K._E2)
        return data

    @property
    def pparams(self) -> np.ndarray:
        return np.array([self.M, self.alpha, self.beta, self.x_lb, self.x_ub])

    def value(self, i, x):
        return float(K.scalar_penalty_value(*self._data(), int(i), float(x)))

    def conjugate(self, i, v):
        return float(K.scalar_penalty_conjugate(*self._data(), int(i), float(v)))

    def prox(self, i, v, eta):
        return float(K.scalar_penalty_prox(*self._data(), int(i), float(v), float(eta)))

    def subdiff(self, i, x):
        return Interval(*K.scalar_penalty_subdiff(*self._data(), int(i), float(x)))

    def conjugate_subdiff(self, i, v):
        return Interval(*K.scalar_penalty_conjugate_subdiff(*self._data(), int(i), float(v)))

    def param_limit(self, i, lmbd):
        return _mirror(self, self._limit(lmbd))

    def param_slope(self, i, lmbd):
        return _mirror(self, self._slope(lmbd))

    def param_bndry(self, i, lmbd):
        return _mirror(self, self._bndry(lmbd))

    def params(self) -> dict:
        return {}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


def _mirror(pen, pair):
    """Complete a positive-side value, or pass through an explicit pair."""
    if isinstance(pair, tuple):
        return pair
    return (-pair, pair)


def _positive(name, value):
    value = float(value)
    if not value > 0.0 or not math.isfinite(value):
        raise ValueError(f"`{name}` must be positive and finite, got {value}")
    return value


class Bigm(_NativePenalty):
    """``h(x) = indicator(|x| <= M)``."""

    code = K.BIGM
    symmetric = True

    def __init__(self, M: float):
        self.M = _positive("M", M)

    def _slope(self, lmbd):
        return lmbd / self.M

    def _limit(self, lmbd):
        return self.M

    def _bndry(self, lmbd):
        return INF

    def params(self):
        return {"M": self.M}


class BigmL1norm(_NativePenalty):
    """``h(x) = indicator(|x| <= M) + alpha |x|``."""

    code = K.BIGML1NORM
    symmetric = True

    def __init__(self, M: float, alpha: float):
        self.M = _positive("M", M)
        self.alpha = _positive("alpha", alpha)

    def _slope(self, lmbd):
        return self.alpha + lmbd / self.M

    def _limit(self, lmbd):
        return self.M

    def _bndry(self, lmbd):
        return INF

    def params(self):
        return {"M": self.M, "alpha": self.alpha}


class BigmL2norm(_NativePenalty):
    """``h(x) = indicator(|x| <= M) + beta x^2``."""

    code = K.BIGML2NORM
    symmetric = True

    def __init__(self, M: float, beta: float):
        self.M = _positive("M", M)
        self.beta = _positive("beta", beta)

    def _slope(self, lmbd):
        return _bigm_l2_slope(self.M, self.beta, lmbd)

    def _limit(self, lmbd):
        return _bigm_l2_limit(self.M, self.beta, lmbd)

    def _bndry(self, lmbd):
        return _bigm_l2_bndry(self.M, self.beta, lmbd)

    def params(self):
        return {"M": self.M, "beta": self.beta}


def _bigm_l2_slope(M, beta, lmbd):
    if lmbd < beta * M * M:
        return 2.0 * math.sqrt(beta * lmbd)
    return lmbd / M + beta * M


def _bigm_l2_limit(M, beta, lmbd):
    if lmbd < beta * M * M:
        return math.sqrt(lmbd / beta)
    return M


def _bigm_l2_bndry(M, beta, lmbd):
    if lmbd < beta * M * M:
        return 2.0 * math.sqrt(beta * lmbd)
    return INF


class BigmPositiveL1norm(_NativePenalty):
    """``h(x) = indicator(0 <= x <= M) + alpha x``."""

    code = K.BIGMPOSITIVEL1NORM

    def __init__(self, M: float, alpha: float):
        self.M = _positive("M", M)
        self.alpha = _positive("alpha", alpha)

    def _slope(self, lmbd):
        return (-INF, self.alpha + lmbd / self.M)

    def _limit(self, lmbd):
        return (0.0, self.M)

    def _bndry(self, lmbd):
        return (-INF, INF)

    def params(self):
        return {"M": self.M, "alpha": self.alpha}


class BigmPositiveL2norm(_NativePenalty):
    """``h(x) = indicator(0 <= x <= M) + beta x^2``."""

    code = K.BIGMPOSITIVEL2NORM

    def __init__(self, M: float, beta: float):
        self.M = _positive("M", M)
        self.beta = _positive("beta", beta)

    def _slope(self, lmbd):
        return (-INF, _bigm_l2_slope(self.M, self.beta, lmbd))

    def _limit(self, lmbd):
        return (0.0, _bigm_l2_limit(self.M, self.beta, lmbd))

    def _bndry(self, lmbd):
        return (-INF, _bigm_l2_bndry(self.M, self.beta, lmbd))

    def params(self):
        return {"M": self.M, "beta": self.beta}


class Bounds(_NativePenalty):
    """``h(x) = indicator(x_lb <= x <= x_ub)``."""

    code = K.BOUNDS

    def __init__(self, x_lb: float, x_ub: float):
        self.x_lb = float(x_lb)
        self.x_ub = _positive("x_ub", x_ub)
        if not (self.x_lb <= 0.0 and math.isfinite(self.x_lb)):
            raise ValueError(f"`x_lb` must be non-positive and finite, got {self.x_lb}")
        self.symmetric = self.x_lb == -self.x_ub

    def _slope(self, lmbd):
        tn = lmbd / self.x_lb if self.x_lb < 0.0 else -INF
        return (tn, lmbd / self.x_ub)

    def _limit(self, lmbd):
        return (self.x_lb, self.x_ub)

    def _bndry(self, lmbd):
        return (-INF, INF)

    def params(self):
        return {"x_lb": self.x_lb, "x_ub": self.x_ub}


class L1L2norm(_NativePenalty):
    """``h(x) = alpha |x| + beta x^2``."""

    code = K.L1L2NORM
    symmetric = True

    def __init__(self, alpha: float, beta: float):
        self.alpha = _positive("alpha", alpha)
        self.beta = _positive("beta", beta)

    def _slope(self, lmbd):
        return self.alpha + 2.0 * math.sqrt(self.beta * lmbd)

    def _limit(self, lmbd):
        return math.sqrt(lmbd / self.beta)

    def _bndry(self, lmbd):
        return self.alpha + 2.0 * math.sqrt(self.beta * lmbd)

    def params(self):
        return {"alpha": self.alpha, "beta": self.beta}


class L1norm(_NativePenalty):
    """``h(x) = alpha |x|``."""

    code = K.L1NORM
    symmetric = True

    def __init__(self, alpha: float):
        self.alpha = _positive("alpha", alpha)

    def _slope(self, lmbd):
        return self.alpha

    def _limit(self, lmbd):
        return INF

    def _bndry(self, lmbd):
        return INF

    def params(self):
        return {"alpha": self.alpha}


class L2norm(_NativePenalty):
    """``h(x) = beta x^2``."""

    code = K.L2NORM
    symmetric = True

    def __init__(self, beta: float):
        self.beta = _positive("beta", beta)

    def _slope(self, lmbd):
        return 2.0 * math.sqrt(self.beta * lmbd)

    def _limit(self, lmbd):
        return math.sqrt(lmbd / self.beta)

    def _bndry(self, lmbd):
        return 2.0 * math.sqrt(self.beta * lmbd)

    def params(self):
        return {"beta": self.beta}


class PositiveL1norm(_NativePenalty):
    """``h(x) = indicator(x >= 0) + alpha x``."""

    code = K.POSITIVEL1NORM

    def __init__(self, alpha: float):
        self.alpha = _positive("alpha", alpha)

    def _slope(self, lmbd):
        return (-INF, self.alpha)

    def _limit(self, lmbd):
        return (0.0, INF)

    def _bndry(self, lmbd):
        return (-INF, INF)

    def params(self):
        return {"alpha": self.alpha}


class PositiveL2norm(_NativePenalty):
    """``h(x) = indicator(x >= 0) + beta x^2``."""

    code = K.POSITIVEL2NORM

    def __init__(self, beta: float):
        self.beta = _positive("beta", beta)

    def _slope(self, lmbd):
        return (-INF, 2.0 * math.sqrt(self.beta * lmbd))

    def _limit(self, lmbd):
        return (0.0, math.sqrt(lmbd / self.beta))

    def _bndry(self, lmbd):
        return (-INF, 2.0 * math.sqrt(self.beta * lmbd))

    def params(self):
        return {"beta": self.beta}


NATIVE_PENALTIES = {
    cls.__name__: cls
    for cls in (
        Bigm, BigmL1norm, BigmL2norm, BigmPositiveL1norm, BigmPositiveL2norm,
        Bounds, L1L2norm, L1norm, L2norm, PositiveL1norm, PositiveL2norm,
    )
}


def is_native(pen: BasePenalty) -> bool:
    return isinstance(pen, _NativePenalty)


# --------------------------------------------------------------------------
# Relaxation parameters
# --------------------------------------------------------------------------

_PROBE_CAP = 2.0**60


def _slope_bracket(pen, i, lmbd, tol, side):
    """Bracket ``[lo, hi]`` of the sublevel boundary of ``v -> h*(side * v)``.

    Returns ``None`` when ``h*`` stays below ``lmbd`` up to the probe cap.
    """
    hi = 1.0
    while pen.conjugate(i, side * hi) <= lmbd:
        hi *= 2.0
        if hi > _PROBE_CAP:
            return None
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pen.conjugate(i, side * mid) <= lmbd:
            lo = mid
        else:
            hi = mid
    return lo, hi


def approximate_slope(pen: BasePenalty, i: int, lmbd: float, tol: float = 1e-12) -> float:
    """Bisection estimate of ``tau_pos = sup{v >= 0 : h*(v) <= lmbd}``.

    The returned value satisfies ``h*(v) <= lmbd`` and lies within ``tol`` of
    the supremum.
    """
    if not tol > 0.0:
        raise ValueError("`tol` must be positive")
    bracket = _slope_bracket(pen, i, lmbd, tol, 1.0)
    if bracket is None:
        raise InconsistentPenalty(
            f"{pen}: conjugate stays below lambda={lmbd} on the positive axis; "
            "the penalty is not coercive"
        )
    return bracket[0]


def _approximate_negative_slope(pen, i, lmbd, tol):
    bracket = _slope_bracket(pen, i, lmbd, tol, -1.0)
    return -INF if bracket is None else -bracket[0]


def param_slope(pen: BasePenalty, i: int, lmbd: float) -> tuple[float, float]:
    """``(tau_neg, tau_pos)``, analytic when available, else by bisection."""
    pair = pen.param_slope(i, lmbd)
    if pair is not None:
        return pair
    tau_pos = approximate_slope(pen, i, lmbd)
    if pen.symmetric:
        return (-tau_pos, tau_pos)
    return (_approximate_negative_slope(pen, i, lmbd, 1e-12), tau_pos)


def default_param_limit(pen: BasePenalty, i: int, tau_neg: float, tau_pos: float) -> tuple[float, float]:
    """``(mu_neg, mu_pos)`` from the conjugate subdifferential at ``tau``.

    When ``tau_neg`` is infinite the envelope has no negative linear part and
    ``mu_neg`` is 0.
    """
    if tau_pos == INF:
        mu_pos = INF
    else:
        sd = pen.conjugate_subdiff(i, tau_pos)
        mu_pos = INF if sd.is_empty else max(sd.hi, 0.0)
    if tau_neg == -INF:
        mu_neg = 0.0
    else:
        sd = pen.conjugate_subdiff(i, tau_neg)
        mu_neg = -INF if sd.is_empty else min(sd.lo, 0.0)
    return (mu_neg, mu_pos)


def default_param_bndry(pen: BasePenalty, i: int, mu_neg: float, mu_pos: float) -> tuple[float, float]:
    """``(kappa_neg, kappa_pos)`` from the subdifferential of ``h`` at ``mu``."""
    if mu_pos == INF:
        kappa_pos = INF
    else:
        sd = pen.subdiff(i, mu_pos)
        kappa_pos = INF if sd.is_empty else sd.hi
    if mu_neg == -INF:
        kappa_neg = -INF
    else:
        sd = pen.subdiff(i, mu_neg)
        kappa_neg = -INF if sd.is_empty else sd.lo
    return (kappa_neg, kappa_pos)


def param_limit(pen: BasePenalty, i: int, lmbd: float) -> tuple[float, float]:
    pair = pen.param_limit(i, lmbd)
    if pair is not None:
        return pair
    return default_param_limit(pen, i, *param_slope(pen, i, lmbd))


def param_bndry(pen: BasePenalty, i: int, lmbd: float) -> tuple[float, float]:
    pair = pen.param_bndry(i, lmbd)
    if pair is not None:
        return pair
    return default_param_bndry(pen, i, *param_limit(pen, i, lmbd))


def _numerical_limit(pen, i, lmbd, side, tol=1e-12):
    # Right limit of the conjugate subdifferential just past the bisection
    # bracket; evaluating exactly at an approximate tau is wrong at kinks.
    bracket = _slope_bracket(pen, i, lmbd, tol, side)
    if bracket is None:
        return 0.0
    sd = pen.conjugate_subdiff(i, side * bracket[1])
    if sd.is_empty:
        return side * INF
    return sd.lo if side > 0 else sd.hi


def penalty_params(pen: BasePenalty, i: int, lmbd: float) -> PenaltyParams:
    """All six relaxation parameters of coordinate ``i``."""
    tau = param_slope(pen, i, lmbd)
    mu = pen.param_limit(i, lmbd)
    if mu is None:
        if pen.param_slope(i, lmbd) is not None:
            mu = default_param_limit(pen, i, *tau)
        else:
            mu_pos = _numerical_limit(pen, i, lmbd, 1.0)
            mu_neg = -mu_pos if pen.symmetric else _numerical_limit(pen, i, lmbd, -1.0)
            mu = (mu_neg, mu_pos)
    kappa = pen.param_bndry(i, lmbd)
    if kappa is None:
        kappa = default_param_bndry(pen, i, *mu)
    if pen.symmetric:
        tau, mu, kappa = (-tau[1], tau[1]), (-mu[1], mu[1]), (-kappa[1], kappa[1])
    return PenaltyParams(tau[0], tau[1], mu[0], mu[1], kappa[0], kappa[1])


def params_arrays(pen: BasePenalty, n: int, lmbd: float) -> tuple[np.ndarray, ...]:
    """Per-coordinate parameter arrays ``(tn, tp, mn, mp, kn, kp)``."""
    if is_native(pen):
        rows = [penalty_params(pen, 0, lmbd).as_tuple()] * n
    else:
        rows = [penalty_params(pen, i, lmbd).as_tuple() for i in range(n)]
    return tuple(np.array(col, dtype=np.float64) for col in zip(*rows))
