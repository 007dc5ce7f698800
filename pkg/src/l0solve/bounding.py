"""Lower and upper bounding problems of a branch-and-bound node.

The lower bound of a node is obtained from its convex relaxation, where
coordinates fixed to zero contribute the indicator of ``{0}``, coordinates
fixed to nonzero contribute ``h + lmbd`` and free coordinates contribute the
convex envelope ``g**``. The relaxation is solved by coordinate descent over a
working set that grows until no coordinate outside of it violates its
optimality condition. Every iterate yields a dual certificate

    D(u) = -f*(-u) - sum_i (relaxed term i)*(a_i^T u)

which is a valid lower bound by weak duality, whatever the accuracy reached.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from l0solve import _kernels as K
from l0solve.penalties import Interval
from l0solve.problem import Node, Problem, SolverOptions

#: Number of coordinates seeding the working set of a fresh node.
SEED_SIZE = 100

#: Maximal number of violating coordinates added to the working set at once.
MAX_ADDED = 10

#: Accuracy of the working-set passes preceding the final one.
LOOSE_TOL = 1e-4


def prune_threshold(incumbent: float, rel_tol: float) -> float:
    """Bound above which a node cannot improve on ``incumbent``."""
    if incumbent == math.inf:
        return math.inf
    return incumbent - rel_tol * max(1.0, abs(incumbent))


@dataclass
class BoundingState:
    """Iterate of the working-set solver of one node."""

    x_tilde: NDArray
    Ax: NDArray
    u_tilde: NDArray
    workset: NDArray
    gap: float = math.inf
    dual_value: float = -math.inf
    screened: NDArray | None = None
    steps: NDArray | None = None


@dataclass
class LowerBound:
    """Output of :func:`solve_lower_bound`.

    ``u`` is the dual point certifying ``lower_bound``. ``fixations`` lists
    ``(i, bit)`` pairs: coordinate ``i`` may be fixed to zero (``bit=0``) or
    to nonzero (``bit=1``) in every descendant of the node.
    """

    x: NDArray
    u: NDArray
    lower_bound: float
    pruned: bool
    fixations: list = field(default_factory=list)
    workset: tuple = ()
    screened: tuple = ()
    primal: float = math.inf
    iterations: int = 0


def _active(status):
    return np.flatnonzero(status != K.ZERO)


def _initial_workset(problem, node, status, x):
    n = problem.n
    in_ws = np.zeros(n, dtype=np.bool_)
    if node.workset:
        in_ws[list(node.workset)] = True
    else:
        grad = problem.loss.gradient(np.zeros(problem.m))
        score = np.abs(problem.A.T @ grad)
        k = min(n, SEED_SIZE)
        in_ws[np.argsort(-score, kind="stable")[:k]] = True
    in_ws[x != 0.0] = True
    in_ws[status == K.NONZERO] = True
    in_ws[status == K.ZERO] = False
    return in_ws


def _initial_point(problem, node, status):
    x = np.array(node.x_warm, dtype=np.float64)
    x[status == K.ZERO] = 0.0
    w = problem.A @ x
    if not math.isfinite(problem.loss.value(w)):
        x[:] = 0.0
        w[:] = 0.0
    return x, w


def _step_sizes(problem):
    # initial backtracking steps, only used by losses without a Lipschitz constant
    colsq = problem.ctx[1]
    return 1.0 / np.where(colsq > 0.0, colsq, 1.0)


def _rescaled_certificate(ns, ctx, status, active, u, s):
    # D is evaluated again at the stored point s * u, whose correlations may
    # differ from s * (a_i^T u) by rounding and leave a conjugate domain
    av = np.empty(active.size)
    for k in range(30):
        u_hat = s * u
        ns.correlations(ctx, active, u_hat, av)
        dual = ns.dual_at_scale(ctx, status, active, u_hat, av, 1.0)
        if dual > -math.inf:
            return dual, s, u_hat
        s *= 1.0 - min(1e-12 * 4.0**k, 0.5)
    return -math.inf, 0.0, np.zeros_like(u)


def solve_lower_bound(
    problem: Problem,
    node: Node,
    opts: SolverOptions | None = None,
    incumbent: float = math.inf,
    tol: float | None = None,
) -> LowerBound:
    """Lower bound of the node by the working-set method.

    Parameters
    ----------
    problem : Problem
    node : Node
    opts : SolverOptions, optional
    incumbent : float
        Objective of the best known feasible point. The method returns as soon
        as a dual certificate proves that the node cannot improve on it.
    tol : float, optional
        Relative gap target of the inner solver, ``opts.inner_tol`` by default.

    Returns
    -------
    LowerBound
    """
    opts = opts or SolverOptions()
    tol = opts.inner_tol if tol is None else tol
    ns, ctx = problem.kernels, problem.ctx
    n, m = problem.n, problem.m
    status = node.status()
    active = _active(status)
    x, w = _initial_point(problem, node, status)
    in_ws = _initial_workset(problem, node, status, x)
    screened = np.zeros(n, dtype=np.bool_)
    viol = np.zeros(n)
    steps = _step_sizes(problem)
    av = np.empty(active.size)
    use_screening = opts.enable_screening and ctx[14] > 0.0
    threshold = prune_threshold(incumbent, opts.rel_gap_tol)

    best_dual = -math.inf
    best_u = np.zeros(m)
    primal = math.inf
    pruned = False
    # intermediate passes only steer the working set, a loose accuracy suffices
    pass_tol = max(tol, LOOSE_TOL)
    it = 0
    while it < n + 2:
        it += 1
        ws = np.flatnonzero(in_ws)
        if ws.size:
            ns.cd_solve(ctx, status, ws, x, w, pass_tol, opts.max_sweeps, steps)
        ns.recompute_w(ctx, x, w)
        grad = problem.loss.gradient(w)
        u = -grad
        ns.correlations(ctx, active, u, av)
        dual, s = ns.dual_value(ctx, status, active, u, av)
        if s < 1.0:
            dual, s, u_hat = _rescaled_certificate(ns, ctx, status, active, u, s)
        else:
            u_hat = u
        if dual > best_dual:
            best_dual = dual
            best_u = u_hat
        primal = ns.primal_value(ctx, status, active, x, w)
        if best_dual > threshold:
            pruned = True
            break
        if use_screening and math.isfinite(primal) and dual > -math.inf:
            before = screened.copy()
            ns.screen(ctx, status, u_hat, grad, max(primal - dual, 0.0), screened)
            fresh = np.flatnonzero(screened & ~before)
            if fresh.size:
                in_ws[fresh] = False
                nzf = fresh[x[fresh] != 0.0]
                if nzf.size:
                    x[nzf] = 0.0
                    ns.recompute_w(ctx, x, w)
        count = ns.violations(ctx, status, in_ws, screened, u, viol)
        if count == 0:
            if pass_tol <= tol:
                break
            pass_tol = tol
            continue
        if count > MAX_ADDED:
            added = np.argpartition(-viol, MAX_ADDED)[:MAX_ADDED]
        else:
            added = np.flatnonzero(viol)
        in_ws[added] = True

    fixations = []
    if not pruned and opts.enable_simultaneous_pruning and best_dual > -math.inf:
        fixations, raise_by = _fixations(problem, status, best_u, best_dual, threshold)
        if raise_by is not None:
            # both children of a coordinate are pruned, so is the node
            best_dual += raise_by
            pruned = True
    return LowerBound(
        x=x,
        u=best_u,
        lower_bound=best_dual,
        pruned=pruned,
        fixations=fixations,
        workset=tuple(int(i) for i in np.flatnonzero(in_ws)),
        screened=tuple(int(i) for i in np.flatnonzero(screened)),
        primal=float(primal),
        iterations=it,
    )


def child_bounds(problem: Problem, node: Node, u: NDArray, dual_value: float) -> tuple[NDArray, NDArray]:
    """Dual bounds at ``u`` of the children obtained by fixing each free coordinate.

    Returns arrays ``(b0, b1)`` of length ``n``: ``b0[i]`` bounds the child
    where ``i`` is fixed to zero and ``b1[i]`` the child where it is fixed to
    nonzero. Entries of non-free coordinates equal ``dual_value``.
    """
    d0 = np.empty(problem.n)
    d1 = np.empty(problem.n)
    problem.kernels.child_deltas(problem.ctx, node.status(), np.ascontiguousarray(u, dtype=np.float64), d0, d1)
    return dual_value + d0, dual_value + d1


def _fixations(problem, status, u, dual, threshold):
    n = problem.n
    d0 = np.empty(n)
    d1 = np.empty(n)
    problem.kernels.child_deltas(problem.ctx, status, u, d0, d1)
    fixations = []
    for i in np.flatnonzero(status == K.FREE):
        prune0 = dual + d0[i] > threshold
        prune1 = dual + d1[i] > threshold
        if prune0 and prune1:
            return [], min(d0[i], d1[i])
        if prune0:
            fixations.append((int(i), 1))
        elif prune1:
            fixations.append((int(i), 0))
    return fixations, None


def solve_upper_bound(
    problem: Problem,
    node: Node,
    opts: SolverOptions | None = None,
    support=None,
    tol: float | None = None,
) -> tuple[NDArray, float]:
    """Feasible point supported on ``node.nu1`` (or on ``support``) and its objective.

    The restricted problem, where every coordinate of the support carries
    ``h + lmbd``, is convex and solved by coordinate descent. The returned
    value is the exact objective of the point, hence a valid upper bound.
    """
    opts = opts or SolverOptions()
    tol = opts.inner_tol if tol is None else tol
    n = problem.n
    S = np.array(sorted(node.nu1 if support is None else support), dtype=np.int64)
    x = np.zeros(n)
    if S.size == 0:
        return x, float(problem.loss.value(np.zeros(problem.m)))
    status = np.zeros(n, dtype=np.int64)
    status[S] = K.NONZERO
    x[S] = node.x_warm[S]
    w = problem.A @ x
    if not math.isfinite(problem.loss.value(w)):
        x[:] = 0.0
        w[:] = 0.0
    ns = problem.kernels
    ns.cd_solve(problem.ctx, status, S, x, w, tol, opts.max_sweeps, _step_sizes(problem))
    ns.recompute_w(problem.ctx, x, w)
    nz = np.flatnonzero(x)
    ones = np.ones(n, dtype=np.int64)
    return x, float(ns.primal_value(problem.ctx, ones, nz, x, w))


def coordinate_descent_pass(state: BoundingState, problem: Problem, node: Node) -> BoundingState:
    """One sweep of proximal coordinate descent over ``state.workset``."""
    if state.steps is None:
        state.steps = _step_sizes(problem)
    status = node.status()
    ws = np.ascontiguousarray(state.workset, dtype=np.int64)
    _, primal, dual, gap = problem.kernels.cd_solve(
        problem.ctx, status, ws, state.x_tilde, state.Ax, 0.0, 1, state.steps
    )
    state.u_tilde = -problem.loss.gradient(state.Ax)
    state.dual_value = dual_bound(problem, node, state.u_tilde)
    state.gap = relaxation_gap(problem, node, state.x_tilde, state.u_tilde)
    return state


def relaxation_objective(problem: Problem, node: Node, x: NDArray) -> float:
    """Objective of the node relaxation at ``x``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    status = node.status()
    if np.any(x[status == K.ZERO] != 0.0):
        return math.inf
    w = problem.A @ x
    return float(problem.kernels.primal_value(problem.ctx, status, _active(status), x, w))


def dual_bound(problem: Problem, node: Node, u: NDArray) -> float:
    """Dual certificate ``D(u)``; ``-inf`` outside the dual domain."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    status = node.status()
    active = _active(status)
    av = np.empty(active.size)
    problem.kernels.correlations(problem.ctx, active, u, av)
    return float(problem.kernels.dual_at_scale(problem.ctx, status, active, u, av, 1.0))


def relaxation_gap(problem: Problem, node: Node, x: NDArray, u: NDArray) -> float:
    """Relaxation objective at ``x`` minus ``D(u)``, clamped at 0."""
    p = relaxation_objective(problem, node, x)
    d = dual_bound(problem, node, u)
    if p == math.inf or d == -math.inf:
        return math.inf
    return max(p - d, 0.0)


def _relaxed_subdiff(problem, status, i, x):
    par = tuple(p[i] for p in problem.params)
    return Interval(*problem.kernels.rel_subdiff(problem.ctx, int(status[i]), int(i), float(x), par))


def violation_set(problem: Problem, node: Node, x: NDArray, u: NDArray, workset, screened=()) -> set[int]:
    """Coordinates outside the working set whose optimality condition fails.

    Coordinate ``i`` is optimal when ``a_i^T u`` lies in the subdifferential
    of its relaxed term at ``x_i``. Coordinates fixed to zero and screened
    coordinates are never inspected.
    """
    status = node.status()
    skip = set(int(i) for i in workset) | set(int(i) for i in screened)
    corr = problem.A.T @ np.asarray(u, dtype=np.float64)
    out = set()
    for i in range(problem.n):
        if i in skip or status[i] == K.ZERO:
            continue
        if corr[i] not in _relaxed_subdiff(problem, status, i, x[i]):
            out.add(i)
    return out


def screening(problem: Problem, node: Node, x: NDArray, u: NDArray) -> tuple[set[int], set[int]]:
    """Coordinates that vanish at every solution of the node relaxation.

    Returns the screened coordinates fixed to nonzero and the screened free
    coordinates. Requires a Lipschitz constant for the loss gradient; without
    one both sets are empty.
    """
    L = problem.loss.lipschitz_constant()
    if L is None:
        return set(), set()
    x = np.asarray(x, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    gap = relaxation_gap(problem, node, x, u)
    if not math.isfinite(gap):
        return set(), set()
    status = node.status()
    grad = np.ascontiguousarray(problem.loss.gradient(problem.A @ x))
    out = np.zeros(problem.n, dtype=np.bool_)
    problem.kernels.screen(problem.ctx, status, u, grad, gap, out)
    idx = np.flatnonzero(out)
    return (
        {int(i) for i in idx if status[i] == K.NONZERO},
        {int(i) for i in idx if status[i] == K.FREE},
    )
