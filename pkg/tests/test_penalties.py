import math

import numpy as np
import pytest

from instances import PENALTY_NAMES, make_penalty
from l0solve import penalties as P
from l0solve.penalties import (
    BasePenalty,
    Bigm,
    Bounds,
    InconsistentPenalty,
    Interval,
    L1L2norm,
    L1norm,
    L2norm,
    approximate_slope,
    default_param_bndry,
    default_param_limit,
    param_bndry,
    param_limit,
    param_slope,
    penalty_params,
)

INF = math.inf


class Wrapped(BasePenalty):
    """Delegates the five primitives but no closed-form parameters."""

    def __init__(self, pen):
        self.pen = pen
        self.symmetric = pen.symmetric

    def value(self, i, x):
        return self.pen.value(i, x)

    def conjugate(self, i, v):
        return self.pen.conjugate(i, v)

    def prox(self, i, v, eta):
        return self.pen.prox(i, v, eta)

    def subdiff(self, i, x):
        return self.pen.subdiff(i, x)

    def conjugate_subdiff(self, i, v):
        return self.pen.conjugate_subdiff(i, v)


def close(a, b, tol):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol * max(1.0, abs(b))


class TestExamples:
    def test_values(self):
        assert L1L2norm(0.5, 0.25).value(0, 2.0) == pytest.approx(2.0)
        assert Bigm(1.0).value(0, 1.5) == INF

    @pytest.mark.parametrize("name", PENALTY_NAMES)
    def test_zero_at_origin(self, name):
        pen = make_penalty(name, np.random.default_rng(0))
        assert pen.value(0, 0.0) == 0.0
        assert pen.conjugate(0, 0.0) == 0.0

    def test_conjugates(self):
        assert Bigm(1.0).conjugate(0, 0.5) == pytest.approx(0.5)
        assert L2norm(0.25).conjugate(0, 1.0) == pytest.approx(1.0)
        assert L1norm(0.5).conjugate(0, 0.3) == 0.0
        assert L1norm(0.5).conjugate(0, 0.6) == INF

    def test_prox(self):
        assert L1norm(0.5).prox(0, 2.0, 1.0) == pytest.approx(1.5)
        assert Bigm(1.0).prox(0, 3.0, 1.0) == pytest.approx(1.0)
        assert L2norm(0.25).prox(0, 3.0, 2.0) == pytest.approx(1.5)

    def test_subdiff(self):
        assert tuple(L1norm(0.5).subdiff(0, 0.0)) == (-0.5, 0.5)
        assert tuple(Bigm(1.0).subdiff(0, 1.0)) == (0.0, INF)
        assert tuple(L2norm(0.25).subdiff(0, 2.0)) == pytest.approx((1.0, 1.0))
        assert Bigm(1.0).subdiff(0, 2.0).is_empty

    def test_conjugate_subdiff(self):
        assert tuple(Bigm(1.0).conjugate_subdiff(0, 0.5)) == (1.0, 1.0)
        assert tuple(L2norm(0.25).conjugate_subdiff(0, 1.0)) == pytest.approx((2.0, 2.0))
        assert tuple(L1norm(0.5).conjugate_subdiff(0, 0.5)) == (0.0, INF)

    def test_slope(self):
        assert param_slope(Bigm(1.0), 0, 0.25)[1] == pytest.approx(0.25)
        assert param_slope(L2norm(0.25), 0, 0.1)[1] == pytest.approx(2 * math.sqrt(0.025))
        assert param_slope(L1norm(0.5), 0, 3.0)[1] == 0.5

    def test_limit(self):
        assert param_limit(Bigm(1.0), 0, 0.25)[1] == 1.0
        assert param_limit(L2norm(0.25), 0, 0.1)[1] == pytest.approx(math.sqrt(0.4))
        assert param_limit(L1norm(0.5), 0, 0.1)[1] == INF

    def test_bndry(self):
        assert param_bndry(Bigm(1.0), 0, 0.25)[1] == INF
        assert param_bndry(L2norm(0.25), 0, 0.1)[1] == pytest.approx(2 * math.sqrt(0.025))
        assert param_bndry(L1norm(0.5), 0, 0.1)[1] == INF

    def test_approximate_slope(self):
        assert approximate_slope(Bigm(2.0), 0, 1.0, 1e-10) == pytest.approx(0.5, abs=1e-10)
        expected = 0.5 + 2 * math.sqrt(0.025)
        assert approximate_slope(L1L2norm(0.5, 0.25), 0, 0.1, 1e-10) == pytest.approx(expected, abs=1e-10)

    def test_approximate_slope_rejects_bad_tol(self):
        with pytest.raises(ValueError):
            approximate_slope(Bigm(1.0), 0, 1.0, 0.0)


class TestValidation:
    @pytest.mark.parametrize("args", [(0.0,), (-1.0,), (math.inf,)])
    def test_bigm_rejects(self, args):
        with pytest.raises(ValueError):
            Bigm(*args)

    def test_bounds_rejects(self):
        with pytest.raises(ValueError):
            Bounds(0.5, 1.0)
        with pytest.raises(ValueError):
            Bounds(-1.0, -0.5)
        with pytest.raises(ValueError):
            Bounds(0.0, 0.0)

    def test_symmetry_flags(self):
        assert Bounds(-1.0, 1.0).symmetric
        assert not Bounds(-1.0, 2.0).symmetric
        assert not P.PositiveL1norm(0.5).symmetric
        for name in ("Bigm", "BigmL1norm", "BigmL2norm", "L1L2norm", "L1norm", "L2norm"):
            assert make_penalty(name, np.random.default_rng(0)).symmetric

    def test_non_coercive_custom_penalty(self):
        class Zero(BasePenalty):
            symmetric = True

            def value(self, i, x):
                return 0.0

            def conjugate(self, i, v):
                return 0.0 if v == 0.0 else INF

            def prox(self, i, v, eta):
                return v

            def subdiff(self, i, x):
                return Interval(0.0, 0.0)

            def conjugate_subdiff(self, i, v):
                return Interval(-INF, INF) if v == 0.0 else Interval(INF, -INF)

        # h* is finite only at 0, so every positive v is outside the sublevel
        # set and tau = 0; the pathological case is the converse
        class Flat(Zero):
            def conjugate(self, i, v):
                return 0.0

        assert approximate_slope(Zero(), 0, 1.0) == 0.0
        with pytest.raises(InconsistentPenalty):
            approximate_slope(Flat(), 0, 1.0)


@pytest.mark.parametrize("name", PENALTY_NAMES)
class TestProperties:
    def test_fenchel_young(self, name):
        rng = np.random.default_rng(1)
        for _ in range(20):
            pen = make_penalty(name, rng)
            for _ in range(10):
                x = 3 * rng.standard_normal()
                v = 3 * rng.standard_normal()
                hx, hv = pen.value(0, x), pen.conjugate(0, v)
                if math.isfinite(hx) and math.isfinite(hv):
                    assert hx + hv >= v * x - 1e-9
                sd = pen.subdiff(0, x)
                if not sd.is_empty and math.isfinite(hx):
                    w = min(max(v, sd.lo), sd.hi)
                    assert hx + pen.conjugate(0, w) == pytest.approx(w * x, rel=1e-8, abs=1e-8)

    def test_prox_optimality(self, name):
        rng = np.random.default_rng(2)
        for _ in range(20):
            pen = make_penalty(name, rng)
            v, eta = 3 * rng.standard_normal(), rng.uniform(0.1, 3.0)
            p = pen.prox(0, v, eta)
            sd = pen.subdiff(0, p)
            assert not sd.is_empty
            g = (v - p) / eta
            assert sd.lo - 1e-9 <= g <= sd.hi + 1e-9

    def test_conjugate_even_when_symmetric(self, name):
        rng = np.random.default_rng(3)
        pen = make_penalty(name, rng)
        if not pen.symmetric:
            pytest.skip("not symmetric")
        for v in 2 * rng.standard_normal(20):
            assert pen.conjugate(0, v) == pen.conjugate(0, -v)

    def test_sublevel_characterization(self, name):
        rng = np.random.default_rng(4)
        for _ in range(20):
            pen = make_penalty(name, rng)
            lmbd = rng.uniform(0.01, 2.0)
            tn, tp = param_slope(pen, 0, lmbd)
            assert tp >= 0.0 and tn <= 0.0
            assert pen.conjugate(0, tp) <= lmbd + 1e-12
            assert pen.conjugate(0, tp + 1e-8) > lmbd
            if tn > -INF:
                assert pen.conjugate(0, tn) <= lmbd + 1e-12
                assert pen.conjugate(0, tn - 1e-8) > lmbd

    def test_analytic_matches_defaults(self, name):
        rng = np.random.default_rng(5)
        for _ in range(20):
            pen = make_penalty(name, rng)
            lmbd = rng.uniform(0.01, 2.0)
            tau = pen.param_slope(0, lmbd)
            assert close(tau[1], approximate_slope(pen, 0, lmbd), 1e-8)
            mu = pen.param_limit(0, lmbd)
            mu_default = default_param_limit(pen, 0, *tau)
            assert close(mu[0], mu_default[0], 1e-8) and close(mu[1], mu_default[1], 1e-8)
            kappa = pen.param_bndry(0, lmbd)
            kappa_default = default_param_bndry(pen, 0, *mu)
            assert close(kappa[0], kappa_default[0], 1e-8)
            assert close(kappa[1], kappa_default[1], 1e-8)

    def test_numerical_path_matches_analytic(self, name):
        rng = np.random.default_rng(6)
        for _ in range(10):
            pen = make_penalty(name, rng)
            lmbd = rng.uniform(0.01, 2.0)
            exact = penalty_params(pen, 0, lmbd).as_tuple()
            approx = penalty_params(Wrapped(pen), 0, lmbd).as_tuple()
            for a, b in zip(approx, exact):
                assert close(a, b, 1e-8), (approx, exact)

    def test_signed_collapse(self, name):
        rng = np.random.default_rng(7)
        pen = make_penalty(name, rng)
        if not pen.symmetric:
            pytest.skip("not symmetric")
        p = penalty_params(pen, 0, 0.3)
        assert (p.tau_neg, p.mu_neg, p.kappa_neg) == (-p.tau_pos, -p.mu_pos, -p.kappa_pos)


def test_params_arrays_broadcast():
    tn, tp, mn, mp, kn, kp = P.params_arrays(L2norm(0.25), 4, 0.1)
    assert tp.shape == (4,)
    np.testing.assert_allclose(tp, 2 * math.sqrt(0.025))
    np.testing.assert_allclose(tn, -tp)
