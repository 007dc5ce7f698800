import math
import warnings

import numpy as np
import pytest

from instances import LOSS_NAMES, PENALTY_NAMES, make_data, make_penalty
from l0solve import (
    Bigm,
    Exploration,
    Leastsquares,
    Problem,
    SolverOptions,
    Status,
    brute_force_solve,
    objective,
    solve,
)
from l0solve.bnb import (
    NodeQueue,
    branch,
    pruning_test,
    relative_gap,
    select_next,
    simultaneous_prune,
)
from l0solve.bounding import child_bounds, dual_bound, solve_lower_bound
from l0solve.path import lambda_max
from l0solve.problem import Node


def random_problem(rng, loss_name, pen_name, m=None, n=None, scale=None):
    m = int(rng.integers(5, 21)) if m is None else m
    n = int(rng.integers(3, 9)) if n is None else n
    A, loss = make_data(rng, loss_name, m, n)
    pen = make_penalty(pen_name, rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lmax = lambda_max(A, loss, pen)
    scale = rng.uniform(0.0, 1.0) ** 3 if scale is None else scale
    return Problem(A, loss, pen, max(lmax * scale, 1e-6))


def node_with(n, nu0=(), nu1=(), bound=0.0):
    return Node(n, nu0, nu1, lower_bound=bound)


class TestPruningTest:
    def test_examples(self):
        assert pruning_test(math.inf, 5.0, 1e-8)
        assert not pruning_test(4.0, 5.0, 1e-8)
        assert pruning_test(5.0 + 1e-6, 5.0, 1e-8)
        # within the relative tolerance of the incumbent: nothing to gain
        assert pruning_test(5.0 - 1e-9, 5.0, 1e-8)
        assert not pruning_test(5.0 - 1e-6, 5.0, 1e-8)
        assert not pruning_test(1e300, math.inf, 0.0)

    def test_relative_gap(self):
        assert relative_gap(2.0, 1.0) == 0.5
        assert relative_gap(0.5, 0.0) == 0.5
        assert relative_gap(math.inf, 0.0) == math.inf
        assert relative_gap(1.0, 2.0) == 0.0


class TestBranch:
    def test_argmax_magnitude(self):
        c0, c1 = branch(Node(3), np.array([0.1, -0.9, 0.5]))
        assert c0.nu0 == (1,) and c1.nu1 == (1,)
        assert c0.x_warm[1] == 0.0
        assert c1.x_warm[1] == -0.9

    def test_tie_goes_to_first(self):
        c0, _ = branch(Node(2), np.array([0.5, 0.5]))
        assert c0.nu0 == (0,)

    def test_only_free_coordinates(self):
        c0, c1 = branch(Node(3, nu1=(1,)), np.array([0.1, -0.9, 0.5]))
        assert c0.nu0 == (2,) and c1.nu1 == (1, 2)

    def test_children_inherit(self):
        parent = Node(3, workset=(0, 2), lower_bound=1.5, depth=2)
        for child in branch(parent, np.array([0.0, 0.0, 1.0])):
            assert child.workset == (0, 2)
            assert child.lower_bound == 1.5 and child.depth == 3

    def test_no_free_coordinate(self):
        with pytest.raises(ValueError):
            branch(Node(1, nu1=(0,)), np.ones(1))


class TestQueue:
    def test_best_first(self):
        q = NodeQueue(Exploration.BEST_FIRST)
        for b in (3.0, 1.0, 2.0):
            q.push(node_with(1, bound=b))
        assert q.min_bound() == 1.0
        assert [select_next(q).lower_bound for _ in range(3)] == [1.0, 2.0, 3.0]

    def test_best_first_ties_fifo(self):
        q = NodeQueue()
        nodes = [node_with(1, bound=1.0) for _ in range(3)]
        for nd in nodes:
            q.push(nd)
        assert [select_next(q) for _ in range(3)] == nodes

    def test_depth_first(self):
        q = NodeQueue(Exploration.DEPTH_FIRST)
        for b in (1.0, 3.0, 2.0):
            q.push(node_with(1, bound=b))
        assert select_next(q, "depth-first").lower_bound == 2.0

    def test_breadth_first(self):
        q = NodeQueue(Exploration.BREADTH_FIRST)
        for b in (3.0, 1.0, 2.0):
            q.push(node_with(1, bound=b))
        assert select_next(q).lower_bound == 3.0

    def test_empty(self):
        with pytest.raises(IndexError):
            select_next(NodeQueue())

    def test_strategy_mismatch(self):
        with pytest.raises(ValueError):
            select_next(NodeQueue(), "depth-first")


class TestSimultaneousPruning:
    def test_zero_correlation(self):
        # a_i^T u = 0: child0 keeps the bound, child1 gains lmbd
        p = Problem(np.eye(2), Leastsquares(np.array([0.0, 1.0])), Bigm(1.0), 0.3)
        u = np.array([0.0, 0.2])
        d = dual_bound(p, Node(2), u)
        b0, b1 = child_bounds(p, Node(2), u, d)
        assert b0[0] == pytest.approx(d)
        assert b1[0] == pytest.approx(d + 0.3)

    def test_fixation_when_child_pruned(self):
        p = Problem(np.eye(2), Leastsquares(np.array([0.0, 1.0])), Bigm(1.0), 0.3)
        u = np.array([0.0, 0.2])
        d = dual_bound(p, Node(2), u)
        fix = simultaneous_prune(p, Node(2), u, d, incumbent=d + 0.1)
        assert (0, 0) in fix

    @pytest.mark.parametrize("loss_name", LOSS_NAMES)
    def test_deltas_match_rebuilt_children(self, loss_name):
        rng = np.random.default_rng(0)
        checked = 0
        for pen_name in PENALTY_NAMES:
            p = random_problem(rng, loss_name, pen_name)
            st = rng.integers(0, 3, p.n)
            node = Node(p.n, tuple(np.flatnonzero(st == 0)), tuple(np.flatnonzero(st == 1)))
            u = solve_lower_bound(p, node).u
            d = dual_bound(p, node, u)
            b0, b1 = child_bounds(p, node, u, d)
            for i in node.free:
                e0 = dual_bound(p, Node(p.n, node.nu0 + (i,), node.nu1), u)
                e1 = dual_bound(p, Node(p.n, node.nu0, node.nu1 + (i,)), u)
                for got, exp in ((b0[i], e0), (b1[i], e1)):
                    if math.isfinite(exp):
                        assert got == pytest.approx(exp, rel=1e-10, abs=1e-10)
                        checked += 1
                    else:
                        assert got == exp
        assert checked > 0


@pytest.mark.parametrize("loss_name", LOSS_NAMES)
@pytest.mark.parametrize("pen_name", PENALTY_NAMES)
def test_matches_oracle(loss_name, pen_name):
    rng = np.random.default_rng(1)
    for _ in range(3):
        p = random_problem(rng, loss_name, pen_name)
        res = solve(p)
        ref = brute_force_solve(p)
        assert res.status is Status.OPTIMAL
        assert res.objective == pytest.approx(ref.objective, rel=1e-6, abs=1e-6)
        assert res.objective == pytest.approx(objective(p, res.x), abs=1e-10)
        assert res.rel_gap <= 1e-8


class TestSolve:
    def test_zero_at_lambda_max(self):
        rng = np.random.default_rng(2)
        p = random_problem(rng, "Leastsquares", "Bigm", scale=1.0)
        res = solve(p)
        assert res.indices.size == 0
        assert res.objective == pytest.approx(p.loss.value(np.zeros(p.m)))

    def test_flag_neutrality(self):
        rng = np.random.default_rng(3)
        for pen_name in ("Bigm", "L2norm", "L1L2norm"):
            p = random_problem(rng, "Leastsquares", pen_name, n=8)
            on = solve(p, SolverOptions(enable_simultaneous_pruning=True))
            off = solve(p, SolverOptions(enable_simultaneous_pruning=False))
            assert on.objective == pytest.approx(off.objective, rel=1e-8, abs=1e-8)

    @pytest.mark.parametrize("strategy", list(Exploration))
    def test_exploration_strategies(self, strategy):
        rng = np.random.default_rng(4)
        p = random_problem(rng, "Logistic", "L2norm", n=8, scale=0.05)
        ref = brute_force_solve(p)
        res = solve(p, SolverOptions(exploration=strategy))
        assert res.objective == pytest.approx(ref.objective, rel=1e-6)

    def test_screening_flag_neutral(self):
        rng = np.random.default_rng(5)
        p = random_problem(rng, "Leastsquares", "Bigm", n=8, scale=0.05)
        a = solve(p, SolverOptions(enable_screening=True))
        b = solve(p, SolverOptions(enable_screening=False))
        assert a.objective == pytest.approx(b.objective, rel=1e-8)

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        p = random_problem(rng, "Leastsquares", "L2norm", n=8, scale=0.05)
        a, b = solve(p), solve(p)
        assert a.objective == b.objective and a.node_count == b.node_count
        np.testing.assert_array_equal(a.x, b.x)

    def test_workers(self):
        rng = np.random.default_rng(7)
        p = random_problem(rng, "Leastsquares", "L2norm", n=8, scale=0.02)
        a = solve(p)
        b = solve(p, SolverOptions(workers=3))
        assert b.status is Status.OPTIMAL
        assert b.objective == pytest.approx(a.objective, rel=1e-8)

    def test_node_limit(self):
        rng = np.random.default_rng(8)
        A, loss = make_data(rng, "Leastsquares", 30, 40, k=8)
        p = Problem(A, loss, Bigm(3.0), 1e-3)
        res = solve(p, SolverOptions(node_limit=3))
        assert res.status is Status.NODE_LIMIT
        assert res.node_count <= 3
        assert res.lower_bound <= res.objective
        assert res.objective == pytest.approx(objective(p, res.x), abs=1e-10)

    def test_time_limit(self):
        rng = np.random.default_rng(9)
        A, loss = make_data(rng, "Leastsquares", 30, 60, k=10)
        p = Problem(A, loss, Bigm(3.0), 1e-4)
        res = solve(p, SolverOptions(time_limit=0.2))
        assert res.status is Status.TIME_LIMIT
        assert res.solve_time < 5.0

    def test_anytime_bounds(self):
        rng = np.random.default_rng(10)
        for pen_name in ("Bigm", "L1L2norm", "PositiveL2norm"):
            p = random_problem(rng, "Leastsquares", pen_name, n=8, scale=0.05)
            opt = brute_force_solve(p).objective
            seen = []

            def record(progress):
                seen.append((progress.global_lower, progress.incumbent_value))

            solve(p, callback=record)
            assert seen
            lowers = [lo for lo, _ in seen]
            uppers = [up for _, up in seen]
            for lo, up in seen:
                assert lo <= opt + 1e-7 * max(1.0, abs(opt)) and opt <= up + 1e-9
            assert all(b <= a for a, b in zip(uppers, uppers[1:]))
            assert all(b >= a - 1e-12 for a, b in zip(lowers, lowers[1:]))

    def test_warm_start_incumbent(self):
        rng = np.random.default_rng(11)
        p = random_problem(rng, "Leastsquares", "L2norm", n=6, scale=0.05)
        ref = solve(p)
        res = solve(p, x_init=ref.x)
        assert res.objective == pytest.approx(ref.objective, rel=1e-10)

    def test_time_limited_reference_instance(self):
        # weakly regularized standardized design: not closed within the
        # budget, but the returned point and bounds must stay consistent
        rng = np.random.default_rng(12)
        A = rng.standard_normal((71, 200))
        A = (A - A.mean(0)) / A.std(0)
        x = np.zeros(200)
        x[rng.choice(200, 5, replace=False)] = 0.1 * rng.choice([-1.0, 1.0], 5)
        y = A @ x + 0.1 * rng.standard_normal(71)
        y = (y - y.mean()) / y.std()
        p = Problem(A, Leastsquares(y), Bigm(0.1235), 0.0401)
        res = solve(p, SolverOptions(time_limit=5.0))
        assert res.status in (Status.OPTIMAL, Status.TIME_LIMIT)
        assert res.solve_time < 15.0
        assert res.lower_bound <= res.objective
        assert res.objective == pytest.approx(objective(p, res.x), abs=1e-10)
        assert res.objective <= p.loss.value(np.zeros(71))

    def test_reference_instance(self):
        # 71 x 200 Gaussian design, Bigm M = 0.1235, lmbd = 0.0401, with a
        # planted 5-sparse vector inside the box and small noise
        rng = np.random.default_rng(12)
        A = rng.standard_normal((71, 200))
        x = np.zeros(200)
        S = rng.choice(200, 5, replace=False)
        x[S] = 0.1 * rng.choice([-1.0, 1.0], 5)
        y = A @ x + 0.01 * rng.standard_normal(71)
        p = Problem(A, Leastsquares(y), Bigm(0.1235), 0.0401)
        assert p.lmbd < lambda_max(A, p.loss, p.penalty)
        res = solve(p, SolverOptions(time_limit=60.0))
        assert res.status is Status.OPTIMAL
        assert sorted(res.indices) == sorted(S)
