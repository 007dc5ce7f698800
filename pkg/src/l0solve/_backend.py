"""Selection of compiled or pure-Python kernels for a loss/penalty pair."""

import weakref

import numpy as np

from l0solve import _kernels as K
from l0solve.losses import BaseLoss
from l0solve.losses import is_native as loss_is_native
from l0solve.penalties import BasePenalty
from l0solve.penalties import is_native as penalty_is_native

_NATIVE = K.native_build()
_PENALTY_ONLY = weakref.WeakKeyDictionary()


def _loss_primitives(loss):
    def loss_value(ctx, w):
        return loss.value(w)

    def loss_gradient(ctx, w, out):
        out[:] = loss.gradient(w)

    def loss_conjugate(ctx, u, scale):
        return loss.conjugate(scale * u)

    return {"loss_value": loss_value, "loss_gradient": loss_gradient, "loss_conjugate": loss_conjugate}


def _penalty_primitives(pen):
    def penalty_value(ctx, i, x):
        return pen.value(i, x)

    def penalty_conjugate(ctx, i, v):
        return pen.conjugate(i, v)

    def penalty_prox(ctx, i, v, eta):
        return pen.prox(i, v, eta)

    def penalty_subdiff(ctx, i, x):
        sd = pen.subdiff(i, x)
        return sd.lo, sd.hi

    return {
        "penalty_value": penalty_value,
        "penalty_conjugate": penalty_conjugate,
        "penalty_prox": penalty_prox,
        "penalty_subdiff": penalty_subdiff,
    }


def kernels_for(loss: BaseLoss | None, pen: BasePenalty):
    """Kernel namespace for the pair; compiled when both are native."""
    native_loss = loss is None or loss_is_native(loss)
    if native_loss and penalty_is_native(pen):
        return _NATIVE
    if loss is None:
        ns = _PENALTY_ONLY.get(pen)
        if ns is None:
            ns = _PENALTY_ONLY[pen] = K.python_build(**_penalty_primitives(pen))
        return ns
    primitives = {}
    if not native_loss:
        primitives.update(_loss_primitives(loss))
    if not penalty_is_native(pen):
        primitives.update(_penalty_primitives(pen))
    return K.python_build(**primitives)


def context(A, loss, pen, lmbd, params):
    """Kernel context for ``(A, loss, pen, lmbd)``; ``A`` may be ``None``."""
    if A is None:
        AT = np.zeros((0, 0))
        colsq = np.zeros(0)
    else:
        AT = np.ascontiguousarray(A.T)
        colsq = np.einsum("ij,ij->j", A, A)
    if loss is not None and loss_is_native(loss):
        y, lcode, eps = loss.y, loss.code, loss.eps
    else:
        y, lcode, eps = np.zeros(0), K.CUSTOM, 0.0
    L = None if loss is None else loss.lipschitz_constant()
    pparams = pen.pparams if penalty_is_native(pen) else np.zeros(5)
    pcode = pen.code if penalty_is_native(pen) else K.CUSTOM
    return K.make_ctx(
        AT, colsq, y, pparams, params, lcode, pcode, eps, lmbd,
        -1.0 if L is None else L,
    )
