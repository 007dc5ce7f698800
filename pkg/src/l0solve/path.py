"""Regularization paths, ``lmbd_max`` and BIC model selection."""

import math
import warnings
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from l0solve.bnb import solve
from l0solve.losses import BaseLoss
from l0solve.penalties import BasePenalty, params_arrays
from l0solve.problem import Problem, SolveResult, SolverOptions

#: Returned when the zero vector is optimal for every positive ``lmbd``.
LMBD_FLOOR = np.finfo(float).tiny

_BISECTIONS = 60
_FALLBACK_FACTOR = 1e12


def _certified(penalty, n, lmbd, corr):
    tn, tp = params_arrays(penalty, n, lmbd)[:2]
    return bool(np.all(corr <= tp) and np.all(corr >= tn))


def _loss_infimum(loss):
    if loss.infimum is None:
        warnings.warn(
            f"{loss} declares no infimum, 0 is assumed when computing lmbd_max",
            stacklevel=3,
        )
        return 0.0
    return float(loss.infimum)


def lambda_max(A: NDArray, loss: BaseLoss, penalty: BasePenalty) -> float:
    """Smallest ``lmbd`` found for which the zero vector is optimal.

    The zero vector solves the root relaxation, hence the problem, as soon as
    every correlation ``a_i^T (-grad f(0))`` lies in ``[tau_neg, tau_pos]``,
    which are nondecreasing functions of ``lmbd``; the threshold is located by
    bisection. When this certificate cannot be met, ``f(0) - inf f`` is
    returned: beyond it, any nonzero vector costs more than the origin.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[1]
    f0 = float(loss.value(np.zeros(A.shape[0])))
    corr = A.T @ (-loss.gradient(np.zeros(A.shape[0])))
    fallback = f0 - _loss_infimum(loss)

    lo = hi = fallback if fallback > 0.0 else 1.0
    if _certified(penalty, n, hi, corr):
        while True:
            lo = 0.5 * hi
            if lo < LMBD_FLOOR:
                warnings.warn("the zero vector is optimal for every lmbd", stacklevel=2)
                return LMBD_FLOOR
            if not _certified(penalty, n, lo, corr):
                break
            hi = lo
    else:
        cap = _FALLBACK_FACTOR * max(fallback, 1.0)
        while True:
            hi = 2.0 * lo
            if hi > cap:
                return fallback
            if _certified(penalty, n, hi, corr):
                break
            lo = hi
    for _ in range(_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _certified(penalty, n, mid, corr):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class PathSpec:
    """Grid of ``lmbd`` values, as ratios of ``lmbd_max`` or explicit."""

    lmbd_ratio_max: float = 1.0
    lmbd_ratio_min: float = 0.01
    lmbd_num: int = 20
    explicit_grid: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.explicit_grid is not None:
            grid = tuple(float(v) for v in self.explicit_grid)
            if not grid or any(not (v > 0.0 and math.isfinite(v)) for v in grid):
                raise ValueError("`explicit_grid` must hold positive finite values")
            object.__setattr__(self, "explicit_grid", grid)
            return
        if not 0.0 < self.lmbd_ratio_max <= 1.0:
            raise ValueError("`lmbd_ratio_max` must lie in (0, 1]")
        if not 0.0 < self.lmbd_ratio_min < self.lmbd_ratio_max:
            raise ValueError("`lmbd_ratio_min` must lie in (0, lmbd_ratio_max)")
        if self.lmbd_num < 1:
            raise ValueError("`lmbd_num` must be positive")

    def grid(self, lmbd_max: float) -> NDArray:
        """Strictly decreasing grid of ``lmbd`` values."""
        if self.explicit_grid is not None:
            return np.array(sorted(set(self.explicit_grid), reverse=True))
        if self.lmbd_num == 1:
            return np.array([lmbd_max * self.lmbd_ratio_max])
        ratios = np.logspace(
            math.log10(self.lmbd_ratio_max), math.log10(self.lmbd_ratio_min), self.lmbd_num
        )
        return lmbd_max * ratios


@dataclass
class PathResult:
    """Results of a path, ordered by decreasing ``lmbd``."""

    lmbds: list[float] = field(default_factory=list)
    results: list[SolveResult] = field(default_factory=list)
    lmbd_max: float | None = None

    def __len__(self) -> int:
        return len(self.lmbds)

    def __iter__(self) -> Iterator[tuple[float, SolveResult]]:
        return iter(zip(self.lmbds, self.results))

    def __getitem__(self, lmbd: float) -> SolveResult:
        return self.results[self.lmbds.index(lmbd)]


def fit_path(
    A: NDArray,
    loss: BaseLoss,
    penalty: BasePenalty,
    spec: PathSpec | None = None,
    opts: SolverOptions | None = None,
    callback=None,
) -> PathResult:
    """Solve the problem along a grid of ``lmbd`` values.

    Values are processed in decreasing order and each solve starts from the
    previous solution.

    Parameters
    ----------
    callback : callable, optional
        Called with ``(lmbd, result)`` after each solve.
    """
    spec = spec or PathSpec()
    lmax = lambda_max(A, loss, penalty) if spec.explicit_grid is None else None
    grid = spec.grid(lmax)
    out = PathResult(lmbd_max=lmax)
    x_prev = None
    for lmbd in grid:
        problem = Problem(A, loss, penalty, float(lmbd))
        result = solve(problem, opts, x_init=x_prev)
        out.lmbds.append(float(lmbd))
        out.results.append(result)
        x_prev = result.x
        if callback is not None:
            callback(float(lmbd), result)
    return out


def bic(A: NDArray, loss: BaseLoss, x: NDArray) -> float:
    """``2 m f(Ax) + log(m) ||x||_0``."""
    A = np.asarray(A, dtype=np.float64)
    m = A.shape[0]
    x = np.asarray(x, dtype=np.float64)
    return 2.0 * m * float(loss.value(A @ x)) + math.log(m) * int(np.count_nonzero(x))


def select_by_bic(path: PathResult, A: NDArray, loss: BaseLoss) -> tuple[float, SolveResult]:
    """Entry of lowest BIC; ties go to the larger ``lmbd``."""
    if len(path) == 0:
        raise ValueError("empty path")
    order = sorted(range(len(path)), key=lambda k: -path.lmbds[k])
    best = None
    for k in order:
        val = bic(A, loss, path.results[k].x)
        if best is None or val < best[0]:
            best = (val, k)
    return path.lmbds[best[1]], path.results[best[1]]


def bic_values(path: PathResult, A: NDArray, loss: BaseLoss) -> list[float]:
    return [bic(A, loss, r.x) for r in path.results]


def grid_search(
    A: NDArray,
    loss: BaseLoss,
    penalties: Sequence[BasePenalty],
    spec: PathSpec | None = None,
    opts: SolverOptions | None = None,
) -> tuple[BasePenalty, float, SolveResult]:
    """Best ``(penalty, lmbd, result)`` by BIC over several penalties."""
    best = None
    for pen in penalties:
        path = fit_path(A, loss, pen, spec, opts)
        lmbd, res = select_by_bic(path, A, loss)
        val = bic(A, loss, res.x)
        if best is None or val < best[0]:
            best = (val, pen, lmbd, res)
    return best[1], best[2], best[3]
