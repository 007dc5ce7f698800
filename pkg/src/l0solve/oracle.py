"""Exact reference solver by exhaustive support enumeration.

Meant for verification on small instances. Each support is handled by an
accelerated proximal gradient method, deliberately distinct from the
coordinate-descent machinery used by the branch-and-bound solver.
"""

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from l0solve.problem import Problem, SolveResult, Status, objective

#: Largest dimension accepted by the enumeration.
HARD_MAX_DIM = 20


class DimensionError(ValueError):
    """Raised when the problem is too large to enumerate."""


@dataclass(frozen=True)
class OracleOptions:
    max_dim: int = 12
    inner_tol: float = 1e-10
    max_iter: int = 50_000

    def __post_init__(self):
        if not 1 <= self.max_dim <= HARD_MAX_DIM:
            raise ValueError(f"`max_dim` must lie in [1, {HARD_MAX_DIM}]")
        if not self.inner_tol > 0.0:
            raise ValueError("`inner_tol` must be positive")


def solve_support(problem: Problem, support, opts: OracleOptions | None = None):
    """Minimize ``f(A_S z) + sum_{i in S} h(z_i)`` over the support ``S``.

    Returns ``(x, primal, dual)`` where ``x`` is the dense minimizer estimate
    and ``dual <= min <= primal``.
    """
    opts = opts or OracleOptions()
    S = np.asarray(sorted(support), dtype=np.int64)
    x = np.zeros(problem.n)
    if S.size == 0:
        val = float(problem.loss.value(np.zeros(problem.m)))
        return x, val, val
    L = problem.loss.lipschitz_constant()
    if L is None:
        lip = -1.0
    else:
        lip = L * np.linalg.norm(problem.A[:, S], 2) ** 2
        if lip == 0.0:
            lip = -1.0
    z = np.zeros(S.size)
    P, D = problem.kernels.fista(problem.ctx, S, z, opts.inner_tol, opts.max_iter, lip)
    x[S] = z
    return x, float(P), float(D)


def brute_force_solve(problem: Problem, opts: OracleOptions | None = None) -> SolveResult:
    """Global minimizer by enumeration of all supports.

    Supports are visited by increasing cardinality, then in lexicographic
    order, and a support replaces the incumbent only when strictly better.
    A cardinality ``k`` is skipped entirely as soon as ``c + lmbd * k``
    exceeds the incumbent, where ``c`` is a certified lower bound on
    ``min f(Ax) + sum_i h(x_i)``.
    """
    opts = opts or OracleOptions()
    n = problem.n
    if n > opts.max_dim:
        raise DimensionError(f"dimension {n} exceeds max_dim={opts.max_dim}")
    start = time.perf_counter()
    _, _, floor = solve_support(problem, range(n), opts)
    if floor == -math.inf:
        floor = problem.loss.infimum if problem.loss.infimum is not None else -math.inf
    best_x = np.zeros(n)
    best_val = objective(problem, best_x)
    count = 1
    for k in range(1, n + 1):
        if floor + problem.lmbd * k > best_val:
            break
        for S in itertools.combinations(range(n), k):
            x, primal, _ = solve_support(problem, S, opts)
            count += 1
            if primal + problem.lmbd * k < best_val:
                val = objective(problem, x)
                if val < best_val:
                    best_x, best_val = x, val
    return SolveResult(
        status=Status.OPTIMAL,
        x=best_x,
        objective=best_val,
        rel_gap=0.0,
        node_count=count,
        solve_time=time.perf_counter() - start,
        lower_bound=best_val,
    )
