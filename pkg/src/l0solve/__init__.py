"""Exact branch-and-bound solver for l0-regularized problems

    min_x  f(A @ x) + lmbd * ||x||_0 + sum_i h(x_i)

with a convex loss ``f`` and a convex separable penalty ``h``.
"""

from l0solve.bnb import solve
from l0solve.losses import (
    BaseLoss,
    KullbackLeibler,
    Leastsquares,
    Logcosh,
    Logistic,
    Squaredhinge,
)
from l0solve.oracle import OracleOptions, brute_force_solve
from l0solve.path import PathResult, PathSpec, bic, fit_path, lambda_max, select_by_bic
from l0solve.penalties import (
    BasePenalty,
    Bigm,
    BigmL1norm,
    BigmL2norm,
    BigmPositiveL1norm,
    BigmPositiveL2norm,
    Bounds,
    L1L2norm,
    L1norm,
    L2norm,
    PositiveL1norm,
    PositiveL2norm,
)
from l0solve.problem import (
    Exploration,
    Problem,
    SolveResult,
    SolverOptions,
    Status,
    objective,
)

__version__ = "0.1.0"

__all__ = [
    "BaseLoss", "BasePenalty", "Bigm", "BigmL1norm", "BigmL2norm",
    "BigmPositiveL1norm", "BigmPositiveL2norm", "Bounds", "Exploration",
    "KullbackLeibler", "L1L2norm", "L1norm", "L2norm", "Leastsquares",
    "Logcosh", "Logistic", "OracleOptions", "PathResult", "PathSpec",
    "PositiveL1norm", "PositiveL2norm", "Problem", "SolveResult",
    "SolverOptions", "Squaredhinge", "Status", "bic", "brute_force_solve",
    "fit_path", "lambda_max", "objective", "select_by_bic", "solve",
]
