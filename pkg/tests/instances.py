"""Random instance generators shared by the tests."""

import numpy as np

from l0solve import losses, penalties

LOSS_NAMES = ["Leastsquares", "Logistic", "Squaredhinge", "Logcosh", "KullbackLeibler"]
PENALTY_NAMES = [
    "Bigm", "BigmL1norm", "BigmL2norm", "Bounds", "L1L2norm", "L1norm", "L2norm",
    "PositiveL1norm", "PositiveL2norm", "BigmPositiveL1norm", "BigmPositiveL2norm",
]


def make_loss(name, rng, m, w=None):
    """Loss with observations drawn around ``w`` (standard normal by default)."""
    if w is None:
        w = rng.standard_normal(m)
    if name in ("Leastsquares", "Logcosh"):
        return getattr(losses, name)(w + 0.3 * rng.standard_normal(m))
    if name in ("Logistic", "Squaredhinge"):
        y = np.sign(w + 0.3 * rng.standard_normal(m))
        y[y == 0] = 1.0
        return getattr(losses, name)(y)
    if name == "KullbackLeibler":
        return losses.KullbackLeibler(rng.poisson(np.exp(0.5 * w)).astype(float))
    raise KeyError(name)


def make_penalty(name, rng):
    M = rng.uniform(0.5, 3.0)
    alpha = rng.uniform(0.01, 0.5)
    beta = rng.uniform(0.01, 0.5)
    if name == "Bigm":
        return penalties.Bigm(M)
    if name in ("BigmL1norm", "BigmPositiveL1norm"):
        return getattr(penalties, name)(M, alpha)
    if name in ("BigmL2norm", "BigmPositiveL2norm"):
        return getattr(penalties, name)(M, beta)
    if name == "Bounds":
        lb = -rng.uniform(0.0, 3.0) if rng.random() < 0.8 else 0.0
        return penalties.Bounds(lb, rng.uniform(0.5, 3.0))
    if name == "L1L2norm":
        return penalties.L1L2norm(alpha, beta)
    if name in ("L1norm", "PositiveL1norm"):
        return getattr(penalties, name)(alpha)
    if name in ("L2norm", "PositiveL2norm"):
        return getattr(penalties, name)(beta)
    raise KeyError(name)


def make_data(rng, loss_name, m, n, k=None):
    """Design matrix and loss with a planted sparse vector.

    Poisson-type data get a nonnegative design and planted vector so that
    the rates ``A @ x`` stay in the domain of the loss.
    """
    k = max(1, n // 3) if k is None else k
    x = np.zeros(n)
    S = rng.choice(n, k, replace=False)
    if loss_name == "KullbackLeibler":
        A = rng.uniform(0.0, 1.0, (m, n))
        x[S] = rng.uniform(0.5, 1.5, k)
        y = 1.0 + rng.poisson(2.0 * A @ x / k).astype(float)
        return A, losses.KullbackLeibler(y)
    A = rng.standard_normal((m, n))
    x[S] = rng.choice([-1.0, 1.0], k) * rng.uniform(0.5, 1.5, k)
    w = A @ x / np.sqrt(k)
    return A, make_loss(loss_name, rng, m, w)
