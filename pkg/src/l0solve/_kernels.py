"""Low-level numerical kernels.

Everything that runs inside the branch-and-bound hot loop lives here. Scalar
primitives for the native losses and penalties are compiled with numba and
dispatch on an integer code. The algorithms (coordinate descent, dual bound,
violation and screening tests) call the primitives by global name: native
problems use the compiled module functions, problems with user-defined
functions get plain-Python copies of the same functions whose globals point to
the user primitives (see ``python_build``).

Every kernel receives a context tuple with the layout

    (AT, colsq, y, pparams, tn, tp, mn, mp, kn, kp, lcode, pcode, eps, lmbd, L)

where ``AT`` is the transposed design matrix (one row per column of A),
``colsq`` the squared column norms, ``pparams`` the penalty parameters
``[M, alpha, beta, x_lb, x_ub]``, the six next arrays the per-coordinate
relaxation parameters, and ``L`` the gradient Lipschitz constant of the loss
(non-positive when unavailable).
"""

import math
import types
from types import SimpleNamespace

import numba
import numpy as np

INF = math.inf

# Loss codes.
LEASTSQUARES = 0
LOGISTIC = 1
SQUAREDHINGE = 2
LOGCOSH = 3
KULLBACKLEIBLER = 4

# Penalty codes.
BIGM = 0
BIGML1NORM = 1
BIGML2NORM = 2
BIGMPOSITIVEL1NORM = 3
BIGMPOSITIVEL2NORM = 4
BOUNDS = 5
L1L2NORM = 6
L1NORM = 7
L2NORM = 8
POSITIVEL1NORM = 9
POSITIVEL2NORM = 10

CUSTOM = -1

# Coordinate status inside a node.
ZERO = 0
NONZERO = 1
FREE = 2

_jit = numba.njit(cache=True, nogil=True)


def make_ctx(AT, colsq, y, pparams, params, lcode, pcode, eps, lmbd, L):
    """Assemble a kernel context with canonical dtypes."""
    tn, tp, mn, mp, kn, kp = (np.ascontiguousarray(a, dtype=np.float64) for a in params)
    return (
        np.ascontiguousarray(AT, dtype=np.float64),
        np.ascontiguousarray(colsq, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(pparams, dtype=np.float64),
        tn, tp, mn, mp, kn, kp,
        int(lcode), int(pcode),
        float(eps), float(lmbd), float(L),
    )


# --------------------------------------------------------------------------
# Native losses
# --------------------------------------------------------------------------


@_jit
def _xlogx(t):
    if t <= 0.0:
        return 0.0
    return t * math.log(t)


@_jit
def _log1pexp(z):
    if z > 0.0:
        return z + math.log1p(math.exp(-z))
    return math.log1p(math.exp(z))


@_jit
def _sigmoid(t):
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


@_jit
def loss_value(ctx, w):
    y = ctx[2]
    code = ctx[10]
    eps = ctx[12]
    s = 0.0
    if code == LEASTSQUARES:
        for j in range(w.shape[0]):
            d = w[j] - y[j]
            s += 0.5 * d * d
    elif code == LOGISTIC:
        for j in range(w.shape[0]):
            s += _log1pexp(-w[j] * y[j])
    elif code == SQUAREDHINGE:
        for j in range(w.shape[0]):
            t = 1.0 - w[j] * y[j]
            if t > 0.0:
                s += t * t
    elif code == LOGCOSH:
        for j in range(w.shape[0]):
            z = abs(w[j] - y[j])
            s += z + math.log1p(math.exp(-2.0 * z)) - math.log(2.0)
    elif code == KULLBACKLEIBLER:
        for j in range(w.shape[0]):
            z = w[j] + eps
            if z <= 0.0:
                return INF
            if y[j] > 0.0:
                s += y[j] * math.log(y[j] / z) + z - y[j]
            else:
                s += z
    return s


@_jit
def loss_gradient(ctx, w, out):
    y = ctx[2]
    code = ctx[10]
    eps = ctx[12]
    if code == LEASTSQUARES:
        for j in range(w.shape[0]):
            out[j] = w[j] - y[j]
    elif code == LOGISTIC:
        for j in range(w.shape[0]):
            out[j] = -y[j] * _sigmoid(-y[j] * w[j])
    elif code == SQUAREDHINGE:
        for j in range(w.shape[0]):
            t = 1.0 - y[j] * w[j]
            out[j] = -2.0 * y[j] * t if t > 0.0 else 0.0
    elif code == LOGCOSH:
        for j in range(w.shape[0]):
            out[j] = math.tanh(w[j] - y[j])
    elif code == KULLBACKLEIBLER:
        for j in range(w.shape[0]):
            z = w[j] + eps
            if y[j] == 0.0:
                out[j] = 1.0
            elif z > 0.0:
                out[j] = 1.0 - y[j] / z
            else:
                out[j] = -INF


@_jit
def loss_conjugate(ctx, u, scale):
    """Conjugate of the loss evaluated at ``scale * u``."""
    y = ctx[2]
    code = ctx[10]
    eps = ctx[12]
    s = 0.0
    if code == LEASTSQUARES:
        for j in range(u.shape[0]):
            v = scale * u[j]
            s += 0.5 * v * v + v * y[j]
    elif code == LOGISTIC:
        for j in range(u.shape[0]):
            q = -scale * u[j] * y[j]
            if q < 0.0 or q > 1.0:
                return INF
            s += _xlogx(q) + _xlogx(1.0 - q)
    elif code == SQUAREDHINGE:
        for j in range(u.shape[0]):
            v = scale * u[j] * y[j]
            if v > 0.0:
                return INF
            s += v + 0.25 * v * v
    elif code == LOGCOSH:
        for j in range(u.shape[0]):
            v = scale * u[j]
            if abs(v) > 1.0:
                return INF
            s += 0.5 * (_xlogx(1.0 + v) + _xlogx(1.0 - v)) + v * y[j]
    elif code == KULLBACKLEIBLER:
        for j in range(u.shape[0]):
            v = scale * u[j]
            if y[j] > 0.0:
                if v >= 1.0:
                    return INF
                s += -y[j] * math.log1p(-v) - eps * v
            else:
                if v > 1.0:
                    return INF
                s += -eps * v
    return s


# --------------------------------------------------------------------------
# Native penalties (scalar, coordinate independent)
# --------------------------------------------------------------------------


@_jit
def _clip(x, lo, hi):
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


@_jit
def _soft(v, t):
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


@_jit
def _sign(x):
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


@_jit
def penalty_value(ctx, i, x):
    p = ctx[3]
    code = ctx[11]
    M = p[0]
    a = p[1]
    b = p[2]
    if code == BIGM:
        return 0.0 if abs(x) <= M else INF
    if code == BIGML1NORM:
        return a * abs(x) if abs(x) <= M else INF
    if code == BIGML2NORM:
        return b * x * x if abs(x) <= M else INF
    if code == BIGMPOSITIVEL1NORM:
        return a * x if 0.0 <= x <= M else INF
    if code == BIGMPOSITIVEL2NORM:
        return b * x * x if 0.0 <= x <= M else INF
    if code == BOUNDS:
        return 0.0 if p[3] <= x <= p[4] else INF
    if code == L1L2NORM:
        return a * abs(x) + b * x * x
    if code == L1NORM:
        return a * abs(x)
    if code == L2NORM:
        return b * x * x
    if code == POSITIVEL1NORM:
        return a * x if x >= 0.0 else INF
    if code == POSITIVEL2NORM:
        return b * x * x if x >= 0.0 else INF
    return math.nan


@_jit
def penalty_conjugate(ctx, i, v):
    p = ctx[3]
    code = ctx[11]
    M = p[0]
    a = p[1]
    b = p[2]
    if code == BIGM:
        return M * abs(v)
    if code == BIGML1NORM:
        return M * max(abs(v) - a, 0.0)
    if code == BIGML2NORM:
        if abs(v) <= 2.0 * b * M:
            return v * v / (4.0 * b)
        return M * abs(v) - b * M * M
    if code == BIGMPOSITIVEL1NORM:
        return M * max(v - a, 0.0)
    if code == BIGMPOSITIVEL2NORM:
        if v <= 0.0:
            return 0.0
        if v <= 2.0 * b * M:
            return v * v / (4.0 * b)
        return M * v - b * M * M
    if code == BOUNDS:
        return p[4] * v if v >= 0.0 else p[3] * v
    if code == L1L2NORM:
        t = max(abs(v) - a, 0.0)
        return t * t / (4.0 * b)
    if code == L1NORM:
        return 0.0 if abs(v) <= a else INF
    if code == L2NORM:
        return v * v / (4.0 * b)
    if code == POSITIVEL1NORM:
        return 0.0 if v <= a else INF
    if code == POSITIVEL2NORM:
        t = max(v, 0.0)
        return t * t / (4.0 * b)
    return math.nan


@_jit
def penalty_prox(ctx, i, v, eta):
    p = ctx[3]
    code = ctx[11]
    M = p[0]
    a = p[1]
    b = p[2]
    if code == BIGM:
        return _clip(v, -M, M)
    if code == BIGML1NORM:
        return _clip(_soft(v, eta * a), -M, M)
    if code == BIGML2NORM:
        return _clip(v / (1.0 + 2.0 * eta * b), -M, M)
    if code == BIGMPOSITIVEL1NORM:
        return _clip(v - eta * a, 0.0, M)
    if code == BIGMPOSITIVEL2NORM:
        return _clip(v / (1.0 + 2.0 * eta * b), 0.0, M)
    if code == BOUNDS:
        return _clip(v, p[3], p[4])
    if code == L1L2NORM:
        return _soft(v, eta * a) / (1.0 + 2.0 * eta * b)
    if code == L1NORM:
        return _soft(v, eta * a)
    if code == L2NORM:
        return v / (1.0 + 2.0 * eta * b)
    if code == POSITIVEL1NORM:
        return max(v - eta * a, 0.0)
    if code == POSITIVEL2NORM:
        return max(v, 0.0) / (1.0 + 2.0 * eta * b)
    return math.nan


@_jit
def penalty_subdiff(ctx, i, x):
    """Bounds of the subdifferential, ``(inf, -inf)`` when empty."""
    p = ctx[3]
    code = ctx[11]
    M = p[0]
    a = p[1]
    b = p[2]
    if code == BIGM:
        if abs(x) > M:
            return INF, -INF
        if x == M:
            return 0.0, INF
        if x == -M:
            return -INF, 0.0
        return 0.0, 0.0
    if code == BIGML1NORM:
        if abs(x) > M:
            return INF, -INF
        if x == 0.0:
            return -a, a
        if x == M:
            return a, INF
        if x == -M:
            return -INF, -a
        s = a * _sign(x)
        return s, s
    if code == BIGML2NORM:
        if abs(x) > M:
            return INF, -INF
        if x == M:
            return 2.0 * b * M, INF
        if x == -M:
            return -INF, -2.0 * b * M
        return 2.0 * b * x, 2.0 * b * x
    if code == BIGMPOSITIVEL1NORM:
        if x < 0.0 or x > M:
            return INF, -INF
        if x == 0.0:
            return -INF, a
        if x == M:
            return a, INF
        return a, a
    if code == BIGMPOSITIVEL2NORM:
        if x < 0.0 or x > M:
            return INF, -INF
        if x == 0.0:
            return -INF, 0.0
        if x == M:
            return 2.0 * b * M, INF
        return 2.0 * b * x, 2.0 * b * x
    if code == BOUNDS:
        if x < p[3] or x > p[4]:
            return INF, -INF
        if x == p[4]:
            return 0.0, INF
        if x == p[3]:
            return -INF, 0.0
        return 0.0, 0.0
    if code == L1L2NORM:
        if x == 0.0:
            return -a, a
        s = a * _sign(x) + 2.0 * b * x
        return s, s
    if code == L1NORM:
        if x == 0.0:
            return -a, a
        s = a * _sign(x)
        return s, s
    if code == L2NORM:
        return 2.0 * b * x, 2.0 * b * x
    if code == POSITIVEL1NORM:
        if x < 0.0:
            return INF, -INF
        if x == 0.0:
            return -INF, a
        return a, a
    if code == POSITIVEL2NORM:
        if x < 0.0:
            return INF, -INF
        if x == 0.0:
            return -INF, 0.0
        return 2.0 * b * x, 2.0 * b * x
    return math.nan, math.nan


@_jit
def penalty_conjugate_subdiff(ctx, i, v):
    p = ctx[3]
    code = ctx[11]
    M = p[0]
    a = p[1]
    b = p[2]
    if code == BIGM:
        if v > 0.0:
            return M, M
        if v < 0.0:
            return -M, -M
        return -M, M
    if code == BIGML1NORM:
        if abs(v) < a:
            return 0.0, 0.0
        if v == a:
            return 0.0, M
        if v == -a:
            return -M, 0.0
        if v > a:
            return M, M
        return -M, -M
    if code == BIGML2NORM:
        c = _clip(v / (2.0 * b), -M, M)
        return c, c
    if code == BIGMPOSITIVEL1NORM:
        if v < a:
            return 0.0, 0.0
        if v == a:
            return 0.0, M
        return M, M
    if code == BIGMPOSITIVEL2NORM:
        c = _clip(v / (2.0 * b), 0.0, M)
        return c, c
    if code == BOUNDS:
        if v > 0.0:
            return p[4], p[4]
        if v < 0.0:
            return p[3], p[3]
        return p[3], p[4]
    if code == L1L2NORM:
        c = _sign(v) * max(abs(v) - a, 0.0) / (2.0 * b)
        return c, c
    if code == L1NORM:
        if abs(v) < a:
            return 0.0, 0.0
        if v == a:
            return 0.0, INF
        if v == -a:
            return -INF, 0.0
        return INF, -INF
    if code == L2NORM:
        c = v / (2.0 * b)
        return c, c
    if code == POSITIVEL1NORM:
        if v < a:
            return 0.0, 0.0
        if v == a:
            return 0.0, INF
        return INF, -INF
    if code == POSITIVEL2NORM:
        c = max(v, 0.0) / (2.0 * b)
        return c, c
    return math.nan, math.nan


# --------------------------------------------------------------------------
# Relaxed per-coordinate terms
#
# ``par`` is the tuple (tau_neg, tau_pos, mu_neg, mu_pos, kappa_neg,
# kappa_pos) of the coordinate.
# --------------------------------------------------------------------------


@_jit
def rel_value(ctx, st, i, x, par):
    if st == ZERO:
        return 0.0 if x == 0.0 else INF
    lmbd = ctx[13]
    if st == NONZERO:
        return penalty_value(ctx, i, x) + lmbd
    if x == 0.0:
        return 0.0
    if x > 0.0:
        if x <= par[3]:
            return par[1] * x
        return penalty_value(ctx, i, x) + lmbd
    if x >= par[2]:
        return par[0] * x
    return penalty_value(ctx, i, x) + lmbd


@_jit
def rel_conj(ctx, st, i, v):
    if st == ZERO:
        return 0.0
    c = penalty_conjugate(ctx, i, v) - ctx[13]
    if st == NONZERO:
        return c
    return c if c > 0.0 else 0.0


@_jit
def rel_prox(ctx, st, i, v, eta, par):
    if st == ZERO:
        return 0.0
    if st == NONZERO:
        return penalty_prox(ctx, i, v, eta)
    tn = par[0]
    tp = par[1]
    if v > eta * tp:
        c = v - eta * tp
    elif v < eta * tn:
        c = v - eta * tn
    else:
        return 0.0
    if c >= par[3]:
        q = penalty_prox(ctx, i, v, eta)
        return q if q > par[3] else par[3]
    if c <= par[2]:
        q = penalty_prox(ctx, i, v, eta)
        return q if q < par[2] else par[2]
    return c


@_jit
def rel_subdiff(ctx, st, i, x, par):
    if st == ZERO:
        if x == 0.0:
            return -INF, INF
        return INF, -INF
    if st == NONZERO:
        return penalty_subdiff(ctx, i, x)
    if x == 0.0:
        return par[0], par[1]
    if x > 0.0:
        if x < par[3]:
            return par[1], par[1]
        if x == par[3]:
            return par[1], par[5]
        return penalty_subdiff(ctx, i, x)
    if x > par[2]:
        return par[0], par[0]
    if x == par[2]:
        return par[4], par[0]
    return penalty_subdiff(ctx, i, x)


# --------------------------------------------------------------------------
# Algorithms
# --------------------------------------------------------------------------


@_jit
def coord_par(ctx, i):
    return (ctx[4][i], ctx[5][i], ctx[6][i], ctx[7][i], ctx[8][i], ctx[9][i])


@_jit
def dot(a, b):
    s = 0.0
    for j in range(a.shape[0]):
        s += a[j] * b[j]
    return s


@_jit
def correlations(ctx, idx, u, out):
    AT = ctx[0]
    for k in range(idx.shape[0]):
        out[k] = dot(AT[idx[k]], u)


@_jit
def dual_at_scale(ctx, status, idx, u, av, s):
    fc = loss_conjugate(ctx, u, -s)
    if fc == INF or fc != fc:
        return -INF
    tot = -fc
    for k in range(idx.shape[0]):
        i = idx[k]
        c = rel_conj(ctx, status[i], i, s * av[k])
        if c == INF or c != c:
            return -INF
        tot -= c
    return tot


@_jit
def dual_value(ctx, status, idx, u, av):
    """Dual bound at the largest feasible rescaling ``s * u``, s in [0, 1].

    ``av`` must hold the correlations of the columns in ``idx`` with ``u``.
    Every conjugate domain is convex and contains 0, so feasibility is
    monotone in ``s``.
    """
    d = dual_at_scale(ctx, status, idx, u, av, 1.0)
    if d > -INF:
        return d, 1.0
    lo = 0.0
    hi = 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if dual_at_scale(ctx, status, idx, u, av, mid) > -INF:
            lo = mid
        else:
            hi = mid
    return dual_at_scale(ctx, status, idx, u, av, lo), lo


@_jit
def primal_value(ctx, status, idx, x, w):
    tot = loss_value(ctx, w)
    for k in range(idx.shape[0]):
        i = idx[k]
        tot += rel_value(ctx, status[i], i, x[i], coord_par(ctx, i))
    return tot


@_jit
def recompute_w(ctx, x, w):
    AT = ctx[0]
    for j in range(w.shape[0]):
        w[j] = 0.0
    for i in range(x.shape[0]):
        if x[i] != 0.0:
            for j in range(w.shape[0]):
                w[j] += x[i] * AT[i, j]


@_jit
def cd_solve(ctx, status, ws, x, w, tol, max_sweeps, steps):
    """Coordinate descent on the relaxed problem restricted to ``ws``.

    Stops once the duality gap of the restricted problem falls below
    ``tol * max(1, |primal|)``. Returns ``(sweeps, primal, dual, gap)``.
    """
    AT = ctx[0]
    colsq = ctx[1]
    L = ctx[14]
    m = w.shape[0]
    grad = np.empty(m)
    wt = np.empty(m)
    gt = np.empty(m)
    av = np.empty(ws.shape[0])
    primal = INF
    dual = -INF
    gap = INF
    sweep = 0
    stale = True
    while sweep < max_sweeps:
        sweep += 1
        maxd = 0.0
        for k in range(ws.shape[0]):
            i = ws[k]
            st = status[i]
            xi = x[i]
            if st == ZERO or colsq[i] == 0.0:
                if xi != 0.0:
                    for j in range(m):
                        w[j] -= xi * AT[i, j]
                    x[i] = 0.0
                    maxd = max(maxd, abs(xi))
                    stale = True
                continue
            par = coord_par(ctx, i)
            if stale:
                loss_gradient(ctx, w, grad)
                stale = False
            gi = dot(AT[i], grad)
            if L > 0.0:
                eta = 1.0 / (L * colsq[i])
                nx = rel_prox(ctx, st, i, xi - eta * gi, eta, par)
                d = nx - xi
                if d != 0.0:
                    for j in range(m):
                        w[j] += d * AT[i, j]
                    x[i] = nx
            else:
                f0 = loss_value(ctx, w)
                eta = steps[i]
                d = 0.0
                for _ in range(80):
                    nx = rel_prox(ctx, st, i, xi - eta * gi, eta, par)
                    d = nx - xi
                    if d == 0.0:
                        break
                    for j in range(m):
                        wt[j] = w[j] + d * AT[i, j]
                    f1 = loss_value(ctx, wt)
                    ok = f1 <= f0 + gi * d + d * d / (2.0 * eta)
                    if not ok and f1 < INF and abs(f1 - f0) <= 1e-10 * (1.0 + abs(f0)):
                        # value test is below rounding level: check the
                        # secant curvature along the coordinate instead
                        loss_gradient(ctx, wt, gt)
                        ok = (dot(AT[i], gt) - gi) * d <= d * d / eta
                    if ok:
                        for j in range(m):
                            w[j] = wt[j]
                        x[i] = nx
                        steps[i] = 2.0 * eta
                        break
                    eta *= 0.5
                    d = 0.0
                steps[i] = max(steps[i], 1e-300)
            if d != 0.0:
                stale = True
            if abs(d) > maxd:
                maxd = abs(d)
        if sweep % 50 == 0:
            recompute_w(ctx, x, w)
            stale = True
        if maxd != 0.0 and sweep > 10 and sweep % 5 != 0 and sweep < max_sweeps:
            continue
        loss_gradient(ctx, w, grad)
        for j in range(m):
            grad[j] = -grad[j]
        correlations(ctx, ws, grad, av)
        dual, _ = dual_value(ctx, status, ws, grad, av)
        primal = primal_value(ctx, status, ws, x, w)
        stale = True
        gap = primal - dual
        if gap <= tol * max(1.0, abs(primal)):
            break
        if maxd == 0.0:
            break
    return sweep, primal, dual, gap


@_jit
def violations(ctx, status, in_ws, screened, u, out):
    """Distance of ``a_i^T u`` to the subdifferential at 0 of each relaxed term.

    Only coordinates outside the working set, not screened and not fixed to
    zero are inspected; the others get 0. Returns the number of violations.
    """
    AT = ctx[0]
    count = 0
    for i in range(status.shape[0]):
        out[i] = 0.0
        if in_ws[i] or screened[i] or status[i] == ZERO:
            continue
        v = dot(AT[i], u)
        lo, hi = rel_subdiff(ctx, status[i], i, 0.0, coord_par(ctx, i))
        if v < lo:
            out[i] = lo - v
            count += 1
        elif v > hi:
            out[i] = v - hi
            count += 1
    return count


@_jit
def screen(ctx, status, u, grad, gap, out):
    """Gap-ball screening of coordinates that vanish at the relaxation optimum."""
    AT = ctx[0]
    colsq = ctx[1]
    L = ctx[14]
    m = u.shape[0]
    c = np.empty(m)
    sq = 0.0
    for j in range(m):
        c[j] = 0.5 * (u[j] - grad[j])
        t = u[j] + grad[j]
        sq += t * t
    r2 = L * gap - 0.25 * sq
    r = math.sqrt(r2) if r2 > 0.0 else 0.0
    # rounding margin: a correlation sitting exactly on the boundary of the
    # subdifferential (degenerate optimum) must not be screened
    cn = 0.0
    for j in range(m):
        cn += c[j] * c[j]
    r += 1e-12 * (1.0 + math.sqrt(cn))
    count = 0
    for i in range(status.shape[0]):
        if status[i] == ZERO or out[i]:
            continue
        ac = dot(AT[i], c)
        rad = r * math.sqrt(colsq[i])
        lo, hi = rel_subdiff(ctx, status[i], i, 0.0, coord_par(ctx, i))
        if ac - rad > lo and ac + rad < hi:
            out[i] = True
            count += 1
    return count


@_jit
def child_deltas(ctx, status, u, delta0, delta1):
    """Change of the dual bound when a free coordinate is fixed to 0 or to nonzero."""
    AT = ctx[0]
    lmbd = ctx[13]
    for i in range(status.shape[0]):
        if status[i] != FREE:
            delta0[i] = 0.0
            delta1[i] = 0.0
            continue
        v = dot(AT[i], u)
        gs = rel_conj(ctx, FREE, i, v)
        hs = rel_conj(ctx, NONZERO, i, v)
        delta0[i] = gs
        if hs == INF:
            delta1[i] = 0.0
        else:
            delta1[i] = gs - hs


@_jit
def _support_w(ctx, S, z, w):
    AT = ctx[0]
    for j in range(w.shape[0]):
        w[j] = 0.0
    for k in range(S.shape[0]):
        if z[k] != 0.0:
            for j in range(w.shape[0]):
                w[j] += z[k] * AT[S[k], j]


@_jit
def _support_primal(ctx, S, z, w):
    tot = loss_value(ctx, w)
    for k in range(S.shape[0]):
        tot += penalty_value(ctx, S[k], z[k])
    return tot


@_jit
def _support_dual_at(ctx, S, u, av, s):
    fc = loss_conjugate(ctx, u, -s)
    if fc == INF or fc != fc:
        return -INF
    tot = -fc
    for k in range(S.shape[0]):
        c = penalty_conjugate(ctx, S[k], s * av[k])
        if c == INF or c != c:
            return -INF
        tot -= c
    return tot


@_jit
def _support_dual(ctx, S, u, av):
    d = _support_dual_at(ctx, S, u, av, 1.0)
    if d > -INF:
        return d
    lo = 0.0
    hi = 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _support_dual_at(ctx, S, u, av, mid) > -INF:
            lo = mid
        else:
            hi = mid
    return _support_dual_at(ctx, S, u, av, lo)


@_jit
def fista(ctx, S, z, tol, max_iter, lip):
    """Accelerated proximal gradient on ``min f(A_S z) + sum_k h(z_k)``.

    Uses a fixed step ``1 / lip`` when ``lip > 0`` and backtracking otherwise,
    with function-value restarts. Stops when the duality gap falls below
    ``tol * max(1, |primal|)`` or when both the objective and the iterate
    stall at machine precision for 50 iterations. Returns ``(primal, dual)``; ``z`` is updated
    in place.
    """
    AT = ctx[0]
    m = AT.shape[1]
    k = S.shape[0]
    w = np.empty(m)
    wy = np.empty(m)
    wn = np.empty(m)
    grad = np.empty(m)
    gn = np.empty(m)
    gs = np.empty(k)
    yv = z.copy()
    zn = np.empty(k)
    _support_w(ctx, S, z, w)
    P = _support_primal(ctx, S, z, w)
    D = -INF
    t = 1.0
    eta = 1.0 / lip if lip > 0.0 else 1.0
    stalled = 0
    for it in range(max_iter):
        _support_w(ctx, S, yv, wy)
        loss_gradient(ctx, wy, grad)
        for q in range(k):
            gs[q] = dot(AT[S[q]], grad)
        if lip > 0.0:
            for q in range(k):
                zn[q] = penalty_prox(ctx, S[q], yv[q] - eta * gs[q], eta)
            _support_w(ctx, S, zn, wn)
        else:
            fy = loss_value(ctx, wy)
            if fy == INF:
                # the extrapolated point left the domain
                t = 1.0
                for q in range(k):
                    yv[q] = z[q]
                continue
            eta *= 2.0
            for _ in range(100):
                for q in range(k):
                    zn[q] = penalty_prox(ctx, S[q], yv[q] - eta * gs[q], eta)
                _support_w(ctx, S, zn, wn)
                lin = 0.0
                sq = 0.0
                for q in range(k):
                    d = zn[q] - yv[q]
                    lin += gs[q] * d
                    sq += d * d
                fn = loss_value(ctx, wn)
                if fn <= fy + lin + sq / (2.0 * eta):
                    break
                if fn < INF and abs(fn - fy) <= 1e-10 * (1.0 + abs(fy)):
                    # value test is below rounding level: check the secant
                    # curvature along the step instead
                    loss_gradient(ctx, wn, gn)
                    curv = 0.0
                    for q in range(k):
                        curv += (dot(AT[S[q]], gn) - gs[q]) * (zn[q] - yv[q])
                    if curv <= sq / eta:
                        break
                eta *= 0.5
        Pn = _support_primal(ctx, S, zn, wn)
        if Pn > P and t > 1.0:
            # restart from the last accepted iterate; a plain proximal
            # gradient step descends in exact arithmetic and is always kept
            t = 1.0
            for q in range(k):
                yv[q] = z[q]
            continue
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        step = 0.0
        size = 0.0
        for q in range(k):
            step = max(step, abs(zn[q] - z[q]))
            size = max(size, abs(zn[q]))
            yv[q] = zn[q] + (t - 1.0) / tn * (zn[q] - z[q])
            z[q] = zn[q]
        for j in range(m):
            w[j] = wn[j]
        progress = P - Pn
        # the objective flattens quadratically near the optimum, so the
        # iterate must stop moving as well before declaring a stall
        if progress <= 1e-15 * max(1.0, abs(Pn)) and step <= 1e-13 * max(1.0, size):
            stalled += 1
        else:
            stalled = 0
        P = Pn
        t = tn
        if stalled >= 50:
            break
        if it % 10 == 0 or progress == 0.0:
            loss_gradient(ctx, w, grad)
            for j in range(m):
                grad[j] = -grad[j]
            for q in range(k):
                gs[q] = dot(AT[S[q]], grad)
            D = max(D, _support_dual(ctx, S, grad, gs))
            if P - D <= tol * max(1.0, abs(P)):
                break
            if progress == 0.0 and t > 1.0:
                t = 1.0
                for q in range(k):
                    yv[q] = z[q]
    loss_gradient(ctx, w, grad)
    for j in range(m):
        grad[j] = -grad[j]
    for q in range(k):
        gs[q] = dot(AT[S[q]], grad)
    D = max(D, _support_dual(ctx, S, grad, gs))
    return P, D


# Scalar entry points for Python callers: dispatching on the full context
# tuple costs tens of microseconds per call, these take only the penalty data.
_E1 = np.zeros(0)
_E2 = np.zeros((0, 0))


@_jit
def _penalty_ctx(pp, pcode, e1, e2):
    return (e2, e1, e1, pp, e1, e1, e1, e1, e1, e1, CUSTOM, pcode, 0.0, 0.0, -1.0)


@_jit
def scalar_penalty_value(pp, pcode, e1, e2, i, x):
    return penalty_value(_penalty_ctx(pp, pcode, e1, e2), i, x)


@_jit
def scalar_penalty_conjugate(pp, pcode, e1, e2, i, v):
    return penalty_conjugate(_penalty_ctx(pp, pcode, e1, e2), i, v)


@_jit
def scalar_penalty_prox(pp, pcode, e1, e2, i, v, eta):
    return penalty_prox(_penalty_ctx(pp, pcode, e1, e2), i, v, eta)


@_jit
def scalar_penalty_subdiff(pp, pcode, e1, e2, i, x):
    return penalty_subdiff(_penalty_ctx(pp, pcode, e1, e2), i, x)


@_jit
def scalar_penalty_conjugate_subdiff(pp, pcode, e1, e2, i, v):
    return penalty_conjugate_subdiff(_penalty_ctx(pp, pcode, e1, e2), i, v)


@_jit
def _loss_ctx(y, lcode, eps, e1, e2):
    return (e2, e1, y, e1, e1, e1, e1, e1, e1, e1, lcode, CUSTOM, eps, 0.0, -1.0)


@_jit
def vector_loss_value(y, lcode, eps, e1, e2, w):
    return loss_value(_loss_ctx(y, lcode, eps, e1, e2), w)


@_jit
def vector_loss_conjugate(y, lcode, eps, e1, e2, u):
    return loss_conjugate(_loss_ctx(y, lcode, eps, e1, e2), u, 1.0)


@_jit
def vector_loss_gradient(y, lcode, eps, e1, e2, w, out):
    loss_gradient(_loss_ctx(y, lcode, eps, e1, e2), w, out)


PRIMITIVES = (
    "loss_value", "loss_gradient", "loss_conjugate",
    "penalty_value", "penalty_conjugate", "penalty_prox", "penalty_subdiff",
)
_REBOUND = (
    "rel_value", "rel_conj", "rel_prox", "rel_subdiff",
    "coord_par", "dot", "correlations", "dual_at_scale", "dual_value",
    "primal_value", "recompute_w", "cd_solve", "violations", "screen",
    "child_deltas", "_support_w", "_support_primal", "_support_dual_at",
    "_support_dual", "fista",
)


def native_build():
    """Compiled kernels for native losses and penalties."""
    g = globals()
    return SimpleNamespace(**{name: g[name] for name in _REBOUND})


def python_build(**primitives):
    """Pure-Python copies of the kernels running on user-supplied primitives.

    Each keyword must be one of ``PRIMITIVES`` and have the same signature as
    the native primitive it replaces.
    """
    unknown = set(primitives) - set(PRIMITIVES)
    if unknown:
        raise TypeError(f"unknown primitives: {sorted(unknown)}")
    env = dict(globals())
    env.update(primitives)
    for name in _REBOUND:
        f = env[name].py_func
        env[name] = types.FunctionType(f.__code__, env, name, f.__defaults__, f.__closure__)
    return SimpleNamespace(**{name: env[name] for name in _REBOUND})
