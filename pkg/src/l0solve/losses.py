"""Loss functions ``f`` composed with the linear model ``w = A @ x``."""

from abc import ABCMeta, abstractmethod

import numpy as np
from numpy.typing import ArrayLike, NDArray

from l0solve import _kernels as K


class BaseLoss(metaclass=ABCMeta):
    """Base class for losses.

    A loss must be closed, convex, differentiable, lower-bounded and have the
    origin in the interior of its domain. User-defined losses subclass this
    and implement :meth:`value`, :meth:`conjugate` and :meth:`gradient`;
    :meth:`lipschitz_constant` is optional and enables fixed coordinate-descent
    steps and screening tests.
    """

    #: Number of observations ``m``.
    y: NDArray

    #: Known infimum of the loss, ``None`` if undeclared.
    infimum: float | None = None

    def __len__(self) -> int:
        return len(self.y)

    @abstractmethod
    def value(self, w: NDArray) -> float:
        """Loss value at ``w``, possibly ``+inf`` outside the domain."""
        ...

    @abstractmethod
    def conjugate(self, u: NDArray) -> float:
        """Convex conjugate ``sup_w <u, w> - f(w)``."""
        ...

    @abstractmethod
    def gradient(self, w: NDArray) -> NDArray:
        ...

    def lipschitz_constant(self) -> float | None:
        """Lipschitz constant of the gradient, ``None`` when there is none."""
        return None

    def __str__(self) -> str:
        return type(self).__name__


class _NativeLoss(BaseLoss):
    code: int = K.CUSTOM
    _lipschitz: float | None = None
    infimum = 0.0

    def __init__(self, y: ArrayLike) -> None:
        self.y = np.ascontiguousarray(y, dtype=np.float64).ravel()
        if self.y.size == 0:
            raise ValueError("`y` must not be empty")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("`y` must be finite")

    @property
    def eps(self) -> float:
        return 0.0

    def _data(self):
        data = self.__dict__.get("_data_cache")
        if data is None:
            data = (self.y, int(self.code), float(self.eps), K._E1, K._E2)
            self.__dict__["_data_cache"] = data
        return data

    def value(self, w):
        return float(K.vector_loss_value(*self._data(), np.ascontiguousarray(w, dtype=np.float64)))

    def conjugate(self, u):
        return float(K.vector_loss_conjugate(*self._data(), np.ascontiguousarray(u, dtype=np.float64)))

    def gradient(self, w):
        w = np.ascontiguousarray(w, dtype=np.float64)
        out = np.empty_like(w)
        K.vector_loss_gradient(*self._data(), w, out)
        return out

    def lipschitz_constant(self):
        return self._lipschitz

    def params(self) -> dict:
        return {"y": self.y}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(m={len(self.y)})"


class Leastsquares(_NativeLoss):
    """``f(w) = sum_j (w_j - y_j)^2 / 2``."""

    code = K.LEASTSQUARES
    _lipschitz = 1.0


class Logistic(_NativeLoss):
    """``f(w) = sum_j log(1 + exp(-y_j w_j))`` with labels in {-1, +1}."""

    code = K.LOGISTIC
    _lipschitz = 0.25

    def __init__(self, y):
        super().__init__(y)
        _check_labels(self.y, self)


class Squaredhinge(_NativeLoss):
    """``f(w) = sum_j max(1 - y_j w_j, 0)^2`` with labels in {-1, +1}."""

    code = K.SQUAREDHINGE
    _lipschitz = 2.0

    def __init__(self, y):
        super().__init__(y)
        _check_labels(self.y, self)


class Logcosh(_NativeLoss):
    """``f(w) = sum_j log(cosh(w_j - y_j))``."""

    code = K.LOGCOSH
    _lipschitz = 1.0


class KullbackLeibler(_NativeLoss):
    """``f(w) = sum_j y_j log(y_j / (w_j + eps)) + w_j + eps - y_j``.

    The logarithm is extended by ``+inf`` on non-positive arguments, so the
    loss is infinite as soon as some ``w_j + eps <= 0``. Its gradient has no
    global Lipschitz constant.
    """

    code = K.KULLBACKLEIBLER

    def __init__(self, y, eps: float = 1e-8):
        super().__init__(y)
        if np.any(self.y < 0.0):
            raise ValueError("KullbackLeibler requires non-negative `y`")
        if not eps > 0.0:
            raise ValueError("KullbackLeibler requires `eps` > 0")
        self._eps = float(eps)

    @property
    def eps(self) -> float:
        return self._eps

    def params(self) -> dict:
        return {"y": self.y, "eps": self._eps}


def _check_labels(y, loss):
    if not np.all(np.abs(y) == 1.0):
        raise ValueError(f"{loss} requires labels in {{-1, +1}}")


NATIVE_LOSSES = {
    cls.__name__: cls
    for cls in (Leastsquares, Logistic, Squaredhinge, Logcosh, KullbackLeibler)
}


def is_native(loss: BaseLoss) -> bool:
    return isinstance(loss, _NativeLoss)
