"""Branch-and-bound driver."""

import heapq
import itertools
import math
import threading
import time
from collections import deque
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from l0solve.bounding import (
    child_bounds,
    prune_threshold,
    solve_lower_bound,
    solve_upper_bound,
)
from l0solve.problem import (
    Exploration,
    Node,
    Problem,
    SolveResult,
    SolverOptions,
    Status,
    objective,
)

#: Minimal decrease for an incumbent update to be accepted.
INCUMBENT_EPS = 1e-12


@dataclass(frozen=True)
class Progress:
    """Snapshot passed to the progress callback after each node."""

    node_count: int
    global_lower: float
    incumbent_value: float
    queue_size: int
    elapsed: float


def pruning_test(node_lower: float, incumbent: float, rel_tol: float) -> bool:
    """Whether a node with bound ``node_lower`` can be discarded."""
    return node_lower > prune_threshold(incumbent, rel_tol)


def relative_gap(upper: float, lower: float) -> float:
    if upper == math.inf:
        return math.inf
    if lower == math.inf:
        return 0.0
    return max(upper - lower, 0.0) / max(abs(upper), 1.0)


def simultaneous_prune(
    problem: Problem,
    node: Node,
    u: NDArray,
    dual_value: float,
    incumbent: float,
    rel_tol: float = 0.0,
) -> list[tuple[int, int]]:
    """Fixations implied by the child bounds of every free coordinate.

    A pair ``(i, 1)`` means that the child fixing ``i`` to zero is pruned, so
    ``i`` can be fixed to nonzero; ``(i, 0)`` is the converse. When both
    children of a coordinate are pruned the whole node is, and ``(i, -1)`` is
    returned alone.
    """
    b0, b1 = child_bounds(problem, node, u, dual_value)
    out = []
    for i in node.free:
        p0 = pruning_test(b0[i], incumbent, rel_tol)
        p1 = pruning_test(b1[i], incumbent, rel_tol)
        if p0 and p1:
            return [(i, -1)]
        if p0:
            out.append((i, 1))
        elif p1:
            out.append((i, 0))
    return out


def branch(node: Node, x_tilde: ArrayLike, workset=None) -> tuple[Node, Node]:
    """Split ``node`` on the free coordinate of largest magnitude in ``x_tilde``."""
    free = node.free
    if not free:
        raise ValueError("cannot branch on a node without free coordinates")
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    mags = np.abs(x_tilde[list(free)])
    i = free[int(np.argmax(mags))]
    ws = node.workset if workset is None else tuple(workset)
    x0 = x_tilde.copy()
    x0[i] = 0.0
    child0 = Node(
        node.n, node.nu0 + (i,), node.nu1, x0, ws, node.lower_bound, node.depth + 1
    )
    child1 = Node(
        node.n, node.nu0, node.nu1 + (i,), x_tilde, ws, node.lower_bound, node.depth + 1
    )
    return child0, child1


class NodeQueue:
    """Open nodes ordered by an exploration strategy."""

    def __init__(self, strategy: Exploration = Exploration.BEST_FIRST):
        self.strategy = Exploration(strategy)
        self._heap = []
        self._deque = deque()
        self._counter = itertools.count()

    def __len__(self) -> int:
        return len(self._heap) if self.strategy is Exploration.BEST_FIRST else len(self._deque)

    def push(self, node: Node) -> None:
        if self.strategy is Exploration.BEST_FIRST:
            heapq.heappush(self._heap, (node.lower_bound, next(self._counter), node))
        else:
            self._deque.append(node)

    def pop(self) -> Node:
        if self.strategy is Exploration.BEST_FIRST:
            return heapq.heappop(self._heap)[2]
        if self.strategy is Exploration.DEPTH_FIRST:
            return self._deque.pop()
        return self._deque.popleft()

    def min_bound(self) -> float:
        if self.strategy is Exploration.BEST_FIRST:
            return self._heap[0][0] if self._heap else math.inf
        return min((nd.lower_bound for nd in self._deque), default=math.inf)


def select_next(queue: NodeQueue, strategy: Exploration | None = None) -> Node:
    """Pop the next node; raises ``IndexError`` on an empty queue."""
    if strategy is not None and Exploration(strategy) is not queue.strategy:
        raise ValueError("the queue was built for another strategy")
    return queue.pop()


class _Search:
    """Shared state of one branch-and-bound run."""

    def __init__(self, problem, opts, x_init, callback):
        self.problem = problem
        self.opts = opts
        self.callback = callback
        self.queue = NodeQueue(opts.exploration)
        self.lock = threading.Condition()
        self.in_flight = {}
        self.closed_lower = math.inf
        self.node_count = 0
        self.start = time.perf_counter()
        self.limit = None
        self.leaf_tol = min(opts.inner_tol, 0.1 * opts.rel_gap_tol)
        n = problem.n
        self.best_x = np.zeros(n)
        self.best_val = objective(problem, self.best_x)
        if x_init is not None:
            x_init = np.asarray(x_init, dtype=np.float64)
            if x_init.shape != (n,):
                raise ValueError(f"`x_init` must have shape ({n},)")
            val = objective(problem, x_init)
            if val < self.best_val:
                self.best_x, self.best_val = x_init.copy(), val
        root_warm = self.best_x if x_init is not None else None
        self.queue.push(Node(n, x_warm=root_warm))

    def offer(self, x, val):
        # caller holds the lock
        if val < self.best_val - INCUMBENT_EPS:
            self.best_x = np.array(x, dtype=np.float64)
            self.best_val = float(val)

    def global_lower(self):
        lb = min(self.queue.min_bound(), self.closed_lower)
        for b in self.in_flight.values():
            lb = min(lb, b)
        return min(lb, self.best_val)

    def gap(self):
        return relative_gap(self.best_val, self.global_lower())

    def check_limits(self):
        opts = self.opts
        if opts.node_limit is not None and self.node_count >= opts.node_limit:
            self.limit = Status.NODE_LIMIT
        elif opts.time_limit is not None and time.perf_counter() - self.start >= opts.time_limit:
            self.limit = Status.TIME_LIMIT
        return self.limit is not None

    def finished(self):
        if self.limit is not None:
            return True
        if not self.in_flight and len(self.queue) == 0:
            return True
        return self.gap() <= self.opts.rel_gap_tol

    def close(self, bound):
        self.closed_lower = min(self.closed_lower, bound)

    def process(self, node):
        """Bound ``node``; returns ``(children, closed_bound, candidates)``."""
        problem, opts = self.problem, self.opts
        with self.lock:
            incumbent = self.best_val
        candidates = []
        if pruning_test(node.lower_bound, incumbent, opts.rel_gap_tol):
            return [], node.lower_bound, candidates

        x_ub, v_ub = solve_upper_bound(problem, node, opts, tol=self.leaf_tol)
        candidates.append((x_ub, v_ub))
        incumbent = min(incumbent, v_ub)

        leaf = not node.free
        lb = solve_lower_bound(
            problem, node, opts, incumbent, tol=self.leaf_tol if leaf else None
        )
        bound = max(lb.lower_bound, node.lower_bound)
        if not leaf:
            v = objective(problem, lb.x)
            candidates.append((lb.x, v))
            incumbent = min(incumbent, v)
        if lb.pruned or leaf or pruning_test(bound, incumbent, opts.rel_gap_tol):
            return [], bound, candidates

        nu0, nu1 = list(node.nu0), list(node.nu1)
        x_warm = lb.x.copy()
        for i, bit in lb.fixations:
            (nu1 if bit else nu0).append(i)
            if not bit:
                x_warm[i] = 0.0
        fixed = Node(node.n, nu0, nu1, x_warm, lb.workset, bound, node.depth)
        if lb.fixations:
            if not fixed.free:
                return [fixed], None, candidates
        return list(branch(fixed, x_warm, lb.workset)), None, candidates

    def report(self):
        if self.callback is not None:
            self.callback(
                Progress(
                    self.node_count,
                    self.global_lower(),
                    self.best_val,
                    len(self.queue),
                    time.perf_counter() - self.start,
                )
            )

    def worker(self):
        key = None
        while True:
            with self.lock:
                if key is not None:
                    del self.in_flight[key]
                    key = None
                    self.lock.notify_all()
                while len(self.queue) == 0 and self.in_flight and self.limit is None:
                    self.lock.wait()
                if self.finished() or self.check_limits():
                    self.lock.notify_all()
                    return
                node = self.queue.pop()
                self.node_count += 1
                key = object()
                self.in_flight[key] = node.lower_bound
            children, closed, candidates = self.process(node)
            with self.lock:
                for x, val in candidates:
                    self.offer(x, val)
                if closed is not None:
                    self.close(closed)
                if self.opts.exploration is Exploration.DEPTH_FIRST:
                    children = children[::-1]
                for child in children:
                    self.queue.push(child)
                self.report()


def solve(
    problem: Problem,
    opts: SolverOptions | None = None,
    x_init: ArrayLike | None = None,
    callback: Callable[[Progress], None] | None = None,
) -> SolveResult:
    """Solve the problem to global optimality by branch-and-bound.

    Parameters
    ----------
    problem : Problem
    opts : SolverOptions, optional
    x_init : array_like, optional
        Feasible point used as initial incumbent and root warm start.
    callback : callable, optional
        Called with a :class:`Progress` after each processed node.

    Returns
    -------
    SolveResult
    """
    opts = opts or SolverOptions()
    search = _Search(problem, opts, x_init, callback)
    if opts.workers == 1:
        search.worker()
    else:
        threads = [threading.Thread(target=search.worker) for _ in range(opts.workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    lower = search.global_lower()
    gap = relative_gap(search.best_val, lower)
    if search.limit is not None and gap > opts.rel_gap_tol:
        status = search.limit
    else:
        status = Status.OPTIMAL
    return SolveResult(
        status=status,
        x=search.best_x,
        objective=search.best_val,
        rel_gap=gap,
        node_count=search.node_count,
        solve_time=time.perf_counter() - search.start,
        lower_bound=lower,
    )
