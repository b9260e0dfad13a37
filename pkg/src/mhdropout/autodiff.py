"""Minimal reverse-mode automatic differentiation over float64 arrays.

Tensors are rank 0, 1 or 2. Every operation returns a new :class:`Tensor`
that remembers its parents and a closure mapping the output gradient to one
gradient per parent. :func:`backward` traces the graph reachable from a scalar
loss into a :class:`Tape`, replays it in reverse creation order and deposits
gradients on every leaf. Parameters accumulate into ``grad``; other tensors
have ``grad`` overwritten.

Example::

    W = Parameter([[1.0, 2.0], [3.0, 4.0]])
    b = Parameter([0.0, 0.0])
    loss = squared_l2(affine(Tensor([1.0, 1.0]), W, b), Tensor([0.0, 0.0]))
    backward(loss)
    sgd_step([W, b], 0.1)
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import expit

from .errors import DimensionError, NumericError, ValidationError

_creation = itertools.count()
_param_ids = itertools.count()

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    """Dense float64 array node in a computation graph."""

    __slots__ = ("data", "grad", "_parents", "_backward", "_order", "__weakref__")

    def __init__(self, data, _parents: tuple = (), _backward: BackwardFn | None = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim > 2:
            raise DimensionError(f"tensors are at most rank 2, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward = _backward
        self._order = next(_creation)

    @classmethod
    def _result(cls, data: np.ndarray, parents: tuple, fn: BackwardFn) -> "Tensor":
        # Skips validation and copying; data is always a fresh op output.
        t = object.__new__(Tensor)
        t.data = data
        t.grad = None
        t._parents = parents
        t._backward = fn
        t._order = next(_creation)
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"expected a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.data!r})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __getitem__(self, key):
        return index(self, key)


class Parameter(Tensor):
    """Trainable leaf tensor with an accumulated gradient and a stable id."""

    __slots__ = ("identifier", "name")

    def __init__(self, data, name: str | None = None):
        super().__init__(data)
        self.grad = np.zeros_like(self.data)
        self.identifier = next(_param_ids)
        self.name = name

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# primitives


def affine(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """``W @ x + b`` for a vector, or row-wise ``x @ W.T + b`` for a matrix."""
    x = as_tensor(x)
    W, b, xd = weights.data, bias.data, x.data
    if W.ndim != 2 or b.shape != (W.shape[0],) or x.ndim not in (1, 2) or xd.shape[-1] != W.shape[1]:
        raise DimensionError(
            f"affine: input {x.shape}, weights {weights.shape}, bias {bias.shape} are incompatible"
        )
    if x.ndim == 1:
        out = W @ xd + b

        def fn(g):
            return W.T @ g, np.outer(g, xd), g

    else:
        out = xd @ W.T + b

        def fn(g):
            return g @ W, g.T @ xd, g.sum(axis=0)

    return Tensor._result(out, (x, weights, bias), fn)


def _sigmoid(x: Tensor) -> Tensor:
    s = expit(x.data)
    return Tensor._result(s, (x,), lambda g: (g * s * (1.0 - s),))


def _tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return Tensor._result(t, (x,), lambda g: (g * (1.0 - t * t),))


def _relu(x: Tensor) -> Tensor:
    on = x.data > 0
    return Tensor._result(np.where(on, x.data, 0.0), (x,), lambda g: (g * on,))


def _identity(x: Tensor) -> Tensor:
    return Tensor._result(x.data.copy(), (x,), lambda g: (g,))


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "sigmoid": _sigmoid,
    "tanh": _tanh,
    "relu": _relu,
    "linear": _identity,
}


def activation(x: Tensor, kind: str) -> Tensor:
    try:
        fn = ACTIVATIONS[kind]
    except KeyError:
        raise ValidationError(f"unknown activation {kind!r}; expected one of {sorted(ACTIVATIONS)}") from None
    return fn(as_tensor(x))


def mask_apply(x: Tensor, mask) -> Tensor:
    """Hadamard product with a constant 0/1 mask; no gradient reaches the mask."""
    x = as_tensor(x)
    m = np.asarray(mask.data if isinstance(mask, Tensor) else mask, dtype=np.float64)
    if m.shape != x.shape:
        raise DimensionError(f"mask_apply: mask {m.shape} vs input {x.shape}")
    if not np.all((m == 0.0) | (m == 1.0)):
        raise ValidationError("mask_apply: mask entries must be 0 or 1")
    return Tensor._result(x.data * m, (x,), lambda g: (g * m,))


def softmax(x: Tensor) -> Tensor:
    """Softmax along the last axis, stabilised by max subtraction."""
    x = as_tensor(x)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise DimensionError(f"softmax: need a vector or matrix, got shape {x.shape}")
    z = np.exp(x.data - x.data.max(axis=-1, keepdims=True))
    s = z / z.sum(axis=-1, keepdims=True)

    def fn(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return Tensor._result(s, (x,), fn)


def squared_l2(a: Tensor, b: Tensor) -> Tensor:
    """Sum of squared elementwise differences, as a scalar."""
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape("squared_l2", a, b)
    d = a.data - b.data
    return Tensor._result(np.asarray(np.sum(d * d)), (a, b), lambda g: (2.0 * g * d, -2.0 * g * d))


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return Tensor._result(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return Tensor._result(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return Tensor._result(
        ad * bd, (a, b), lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape))
    )


def log(x: Tensor) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data <= 0):
        raise ValidationError("log: input must be strictly positive")
    xd = x.data
    return Tensor._result(np.log(xd), (x,), lambda g: (g / xd,))


def total(x: Tensor, axis: int | None = None) -> Tensor:
    """Sum of all entries, or along one axis."""
    x = as_tensor(x)
    shape = x.shape

    def fn(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return Tensor._result(np.asarray(x.data.sum(axis=axis)), (x,), fn)


def index(x: Tensor, key) -> Tensor:
    """Numpy-style indexing (integers, slices, integer arrays)."""
    x = as_tensor(x)
    shape = x.shape
    out = np.array(x.data[key], dtype=np.float64)

    def fn(g):
        full = np.zeros(shape)
        np.add.at(full, key, g)
        return (full,)

    return Tensor._result(out, (x,), fn)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]
    return Tensor._result(
        np.concatenate([t.data for t in ts], axis=axis),
        tuple(ts),
        lambda g: tuple(np.split(g, splits, axis=axis)),
    )


def repeat_rows(x: Tensor, n: int) -> Tensor:
    """Stack ``n`` copies of a vector, or repeat each row of a matrix ``n`` times."""
    x = as_tensor(x)
    if x.ndim == 1:
        d = x.shape[0]
        out = np.broadcast_to(x.data, (n, d)).copy()
        return Tensor._result(out, (x,), lambda g: (g.sum(axis=0),))
    if x.ndim != 2:
        raise DimensionError(f"repeat_rows: need rank 1 or 2, got {x.shape}")
    k, d = x.shape
    out = np.repeat(x.data, n, axis=0)
    return Tensor._result(out, (x,), lambda g: (g.reshape(k, n, d).sum(axis=1),))


def stop_gradient(x: Tensor) -> Tensor:
    """Same value as ``x`` with no path back to it."""
    return Tensor(as_tensor(x).data)


def straight_through(y: Tensor, y_hat: Tensor) -> Tensor:
    """Forward value of ``y_hat``; backward passes the gradient to ``y`` unchanged."""
    y, y_hat = as_tensor(y), as_tensor(y_hat)
    _check_same_shape("straight_through", y, y_hat)
    return Tensor._result(y_hat.data.copy(), (y,), lambda g: (g,))


# ---------------------------------------------------------------------------
# backward pass and optimisation


class Tape:
    """Operations reachable from a root, in execution order."""

    def __init__(self, ops: list[Tensor]):
        self.ops = ops

    @classmethod
    def trace(cls, root: Tensor) -> "Tape":
        seen: set[int] = set()
        ops: list[Tensor] = []
        stack = [root]
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen.add(id(node))
            if node._backward is not None:
                ops.append(node)
                stack.extend(node._parents)
        ops.sort(key=lambda t: t._order)
        return cls(ops)

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def __reversed__(self):
        return reversed(self.ops)

    def clear(self) -> None:
        for node in self.ops:
            node._parents = ()
            node._backward = None
        self.ops = []


def backward(loss: Tensor) -> Tape:
    """Populate gradients of ``loss`` on every tensor that produced it.

    Returns the (now cleared) tape; ``tape.visited`` lists operations in the
    order they were replayed.
    """
    if loss.data.size != 1:
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not np.isfinite(loss.data).all():
        raise NumericError(f"loss is not finite: {loss.data}")
    tape = Tape.trace(loss)
    grads: dict[Tensor, np.ndarray] = {loss: np.ones_like(loss.data)}
    visited = []
    for node in reversed(tape):
        g = grads.pop(node, None)
        if g is None:
            continue
        visited.append(node)
        node.grad = g
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None:
                continue
            if parent in grads:
                grads[parent] = grads[parent] + pg
            else:
                grads[parent] = pg
    for leaf, g in grads.items():
        if isinstance(leaf, Parameter):
            leaf.grad = leaf.grad + g
        else:
            leaf.grad = g
    tape.visited = visited
    tape.clear()
    return tape


def zero_grad(params: Iterable[Parameter]) -> None:
    for p in params:
        p.zero_grad()


def sgd_step(params: Iterable[Parameter], learning_rate: float) -> None:
    """``value -= learning_rate * grad`` then zero the gradients."""
    if not learning_rate > 0:
        raise ValidationError(f"learning rate must be positive, got {learning_rate}")
    for p in params:
        p.data -= learning_rate * p.grad
        p.zero_grad()
