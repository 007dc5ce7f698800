"""Problem instances, solver options, nodes and results.

The problem solved is

    min_x  f(A @ x) + lmbd * ||x||_0 + sum_i h(x_i)

for a loss ``f`` (see :mod:`l0solve.losses`) and a penalty ``h`` (see
:mod:`l0solve.penalties`).
"""

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

from l0solve import _backend
from l0solve.losses import BaseLoss
from l0solve.penalties import BasePenalty, params_arrays


class ProblemError(ValueError):
    """Raised for inconsistent problem data."""


@dataclass(frozen=True, eq=False)
class Problem:
    """An l0-regularized problem instance.

    Parameters
    ----------
    A : array_like of shape (m, n)
        Linear operator, dense and finite.
    loss : BaseLoss
        Data-fidelity function, evaluated at ``A @ x``.
    penalty : BasePenalty
        Separable penalty applied to every coordinate of ``x``.
    lmbd : float
        Weight of the l0-norm, positive.
    """

    A: NDArray
    loss: BaseLoss
    penalty: BasePenalty
    lmbd: float

    def __post_init__(self):
        object.__setattr__(self, "A", np.array(self.A, dtype=np.float64, order="C"))
        object.__setattr__(self, "lmbd", float(self.lmbd))
        self.A.setflags(write=False)
        validate_problem(self)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def symmetric(self) -> bool:
        """Whether the penalty is even."""
        return bool(self.penalty.symmetric)

    @cached_property
    def column_norms(self) -> NDArray:
        return np.linalg.norm(self.A, axis=0)

    @cached_property
    def params(self) -> tuple[NDArray, ...]:
        """Per-coordinate ``(tau_neg, tau_pos, mu_neg, mu_pos, kappa_neg, kappa_pos)``."""
        return params_arrays(self.penalty, self.n, self.lmbd)

    @cached_property
    def kernels(self):
        return _backend.kernels_for(self.loss, self.penalty)

    @cached_property
    def ctx(self):
        return _backend.context(self.A, self.loss, self.penalty, self.lmbd, self.params)

    def with_lmbd(self, lmbd: float) -> "Problem":
        return Problem(self.A, self.loss, self.penalty, lmbd)


def validate_problem(problem: Problem) -> Problem:
    """Check the consistency of a problem and return it unchanged."""
    A = problem.A
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ProblemError(f"`A` must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ProblemError("`A` must have finite entries")
    if not isinstance(problem.loss, BaseLoss):
        raise ProblemError(f"`loss` must be a BaseLoss, got {type(problem.loss).__name__}")
    if not isinstance(problem.penalty, BasePenalty):
        raise ProblemError(f"`penalty` must be a BasePenalty, got {type(problem.penalty).__name__}")
    if len(problem.loss.y) != A.shape[0]:
        raise ProblemError(
            f"dimension mismatch: `A` has {A.shape[0]} rows but the loss has "
            f"{len(problem.loss.y)} observations"
        )
    if not (problem.lmbd > 0.0 and math.isfinite(problem.lmbd)):
        raise ProblemError(f"`lmbd` must be positive and finite, got {problem.lmbd}")
    zero = np.zeros(A.shape[0])
    if not math.isfinite(problem.loss.value(zero)):
        raise ProblemError("the loss must be finite at the origin")
    indices = [0] if _backend.penalty_is_native(problem.penalty) else range(A.shape[1])
    for i in indices:
        if problem.penalty.value(i, 0.0) != 0.0:
            raise ProblemError(f"the penalty must vanish at 0 (coordinate {i})")
    return problem


def objective(problem: Problem, x: ArrayLike) -> float:
    """Exact objective value, ``+inf`` outside the domain."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (problem.n,):
        raise ValueError(f"`x` must have shape ({problem.n},), got {x.shape}")
    w = problem.A @ x
    nz = np.flatnonzero(x)
    status = np.ones(problem.n, dtype=np.int64)
    return float(problem.kernels.primal_value(problem.ctx, status, nz, x, w))


class Exploration(str, enum.Enum):
    BEST_FIRST = "best-first"
    DEPTH_FIRST = "depth-first"
    BREADTH_FIRST = "breadth-first"


@dataclass(frozen=True)
class SolverOptions:
    """Branch-and-bound options.

    Parameters
    ----------
    rel_gap_tol : float
        Relative gap ``(ub - lb) / max(|ub|, 1)`` at which the solver stops.
    inner_tol : float
        Relative duality-gap target of the bounding solver.
    node_limit : int, optional
        Maximum number of nodes explored.
    time_limit : float, optional
        Maximum wall time in seconds.
    exploration : Exploration
        Node selection strategy.
    enable_simultaneous_pruning : bool
        Test both children of every free coordinate at each node.
    enable_screening : bool
        Gap-ball screening inside the bounding solver.
    workers : int
        Number of worker threads.
    """

    rel_gap_tol: float = 1e-8
    inner_tol: float = 1e-8
    node_limit: int | None = None
    time_limit: float | None = None
    exploration: Exploration = Exploration.BEST_FIRST
    enable_simultaneous_pruning: bool = True
    enable_screening: bool = True
    workers: int = 1
    max_sweeps: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "exploration", Exploration(self.exploration))
        if not self.rel_gap_tol >= 0.0:
            raise ValueError("`rel_gap_tol` must be non-negative")
        if not self.inner_tol >= 0.0:
            raise ValueError("`inner_tol` must be non-negative")
        if self.node_limit is not None and self.node_limit < 1:
            raise ValueError("`node_limit` must be positive")
        if self.time_limit is not None and not self.time_limit > 0.0:
            raise ValueError("`time_limit` must be positive")
        if self.workers < 1:
            raise ValueError("`workers` must be positive")


@dataclass
class Node:
    """A region of the search space.

    Coordinates in ``nu0`` are zero, coordinates in ``nu1`` are nonzero, the
    remaining ones are free. ``x_warm`` and ``workset`` warm-start the bounding
    solver; ``lower_bound`` is inherited from the parent until the node is
    processed.
    """

    n: int
    nu0: tuple[int, ...] = ()
    nu1: tuple[int, ...] = ()
    x_warm: NDArray | None = None
    workset: tuple[int, ...] = ()
    lower_bound: float = -math.inf
    depth: int = 0

    def __post_init__(self):
        self.nu0 = tuple(sorted(self.nu0))
        self.nu1 = tuple(sorted(self.nu1))
        if set(self.nu0) & set(self.nu1):
            raise ValueError("`nu0` and `nu1` must be disjoint")
        if self.x_warm is None:
            self.x_warm = np.zeros(self.n)
        else:
            self.x_warm = np.array(self.x_warm, dtype=np.float64)
        if self.nu0:
            self.x_warm[list(self.nu0)] = 0.0

    @property
    def free(self) -> tuple[int, ...]:
        fixed = set(self.nu0) | set(self.nu1)
        return tuple(i for i in range(self.n) if i not in fixed)

    def status(self) -> NDArray:
        """Status array with the codes of :class:`l0solve.relaxation.CoordStatus`."""
        st = np.full(self.n, 2, dtype=np.int64)
        st[list(self.nu0)] = 0
        st[list(self.nu1)] = 1
        return st


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    NODE_LIMIT = "node_limit"
    TIME_LIMIT = "time_limit"


@dataclass
class SolveResult:
    """Outcome of a solve."""

    status: Status
    x: NDArray
    objective: float
    rel_gap: float
    node_count: int
    solve_time: float
    lower_bound: float = -math.inf
    trace: list = field(default_factory=list, repr=False)

    @property
    def indices(self) -> NDArray:
        return np.flatnonzero(self.x)

    @property
    def values(self) -> NDArray:
        return self.x[self.indices]

    def __str__(self) -> str:
        return (
            "Result\n"
            f"  Status     : {self.status.value}\n"
            f"  Objective  : {self.objective:.6e}\n"
            f"  Rel. gap   : {self.rel_gap:.2e}\n"
            f"  Node count : {self.node_count}\n"
            f"  Solve time : {self.solve_time:.4f} seconds\n"
            f"  Non-zeros  : {self.indices.size}"
        )
