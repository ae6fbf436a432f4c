"""Reverse-mode automatic differentiation over dense float64 arrays.

Every primitive operation produces a new :class:`Tensor` holding its forward
value and a backward closure. Creation order doubles as the tape: it is a
valid topological order of the computation graph, so ``backward()`` replays
the recorded ops in exact reverse order of recording and accumulates
gradients into every reachable tensor.

All values are 64-bit floats and every op checks its output for NaN/Inf,
so numerical blow-ups surface at the op that produced them.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np


class ShapeMismatchError(ValueError):
    """Operands of a primitive op have incompatible shapes."""


class NonFiniteError(FloatingPointError):
    """A forward op produced NaN or Inf, or was fed non-finite data."""


_CREATED = itertools.count()


class Tensor:
    """A node in the computation graph: a float64 array plus bookkeeping.

    Leaf tensors (parameters, inputs, constants) have no parents. Gradients
    are allocated lazily by ``backward()`` and accumulate into ``grad``.
    """

    __slots__ = ("values", "grad", "op", "_parents", "_backward", "_order")

    def __init__(self, values, parents=(), backward=None, op="leaf"):
        arr = np.asarray(values, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"op '{op}' produced non-finite values")
        self.values = arr
        self.grad = None
        self.op = op
        self._parents = tuple(parents)
        self._backward = backward
        self._order = next(_CREATED)

    @property
    def shape(self):
        return self.values.shape

    def item(self) -> float:
        return float(self.values)

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.values.shape})"

    # -- operator sugar, constants lifted to leaf tensors --------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, scalar):
        if isinstance(scalar, Tensor):
            raise TypeError("tensor/tensor division is not a primitive; multiply by a reciprocal")
        return mul(self, 1.0 / float(scalar))

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        """Accumulate d(self)/d(node) into every reachable node's ``grad``.

        Requires a scalar output; visits the tape strictly in reverse
        creation order.
        """
        if self.values.size != 1:
            raise ValueError("backward() requires a scalar output tensor")
        nodes = tape(self)
        for node in nodes:
            node.grad = np.zeros_like(node.values)
        self.grad = np.ones_like(self.values)
        for node in reversed(nodes):
            if node._backward is not None:
                node._backward(node)


def tape(root: Tensor) -> list[Tensor]:
    """All nodes reachable from ``root``, sorted by recording order."""
    seen = set()
    stack = [root]
    found = []
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        found.append(node)
        stack.extend(node._parents)
    found.sort(key=lambda n: n._order)
    return found


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, op="const")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _acc(node: Tensor, grad: np.ndarray):
    node.grad += _unbroadcast(grad, node.values.shape)


# -- primitives ---------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        out_values = a.values + b.values
    except ValueError:
        raise ShapeMismatchError(f"add: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(out):
        _acc(a, out.grad)
        _acc(b, out.grad)

    return Tensor(out_values, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        out_values = a.values - b.values
    except ValueError:
        raise ShapeMismatchError(f"sub: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(out):
        _acc(a, out.grad)
        _acc(b, -out.grad)

    return Tensor(out_values, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    """Element-wise product with numpy broadcasting."""
    a, b = _lift(a), _lift(b)
    try:
        out_values = a.values * b.values
    except ValueError:
        raise ShapeMismatchError(f"mul: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(out):
        _acc(a, out.grad * b.values)
        _acc(b, out.grad * a.values)

    return Tensor(out_values, (a, b), backward, "mul")


def matmul(a, b) -> Tensor:
    """Matrix/vector product for 1-D and 2-D operands (matvec included)."""
    a, b = _lift(a), _lift(b)
    if a.values.ndim not in (1, 2) or b.values.ndim not in (1, 2):
        raise ShapeMismatchError(f"matmul: only 1-D/2-D operands, got {a.shape} and {b.shape}")
    try:
        out_values = a.values @ b.values
    except ValueError:
        raise ShapeMismatchError(f"matmul: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(out):
        g = out.grad
        if a.values.ndim == 2 and b.values.ndim == 2:
            a.grad += g @ b.values.T
            b.grad += a.values.T @ g
        elif a.values.ndim == 2 and b.values.ndim == 1:
            a.grad += np.outer(g, b.values)
            b.grad += a.values.T @ g
        elif a.values.ndim == 1 and b.values.ndim == 2:
            a.grad += b.values @ g
            b.grad += np.outer(a.values, g)
        else:
            a.grad += g * b.values
            b.grad += g * a.values

    return Tensor(out_values, (a, b), backward, "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.values.ndim != 2:
        raise ShapeMismatchError(f"transpose: need a 2-D tensor, got {a.shape}")

    def backward(out):
        a.grad += out.grad.T

    return Tensor(a.values.T, (a,), backward, "transpose")


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [_lift(p) for p in parts]
    if not parts:
        raise ShapeMismatchError("concat: need at least one tensor")
    try:
        out_values = np.concatenate([p.values for p in parts], axis=axis)
    except ValueError:
        shapes = [p.shape for p in parts]
        raise ShapeMismatchError(f"concat: incompatible shapes {shapes} along axis {axis}") from None
    sizes = [p.values.shape[axis] for p in parts]

    def backward(out):
        offset = 0
        for p, size in zip(parts, sizes):
            index = [slice(None)] * out.grad.ndim
            index[axis] = slice(offset, offset + size)
            p.grad += out.grad[tuple(index)]
            offset += size

    return Tensor(out_values, tuple(parts), backward, "concat")


def reshape(a: Tensor, shape) -> Tensor:
    def backward(out):
        a.grad += out.grad.reshape(a.values.shape)

    return Tensor(a.values.reshape(shape), (a,), backward, "reshape")


def getitem(a: Tensor, index) -> Tensor:
    def backward(out):
        np.add.at(a.grad, index, out.grad)

    return Tensor(a.values[index], (a,), backward, "getitem")


def tanh(a) -> Tensor:
    a = _lift(a)
    y = np.tanh(a.values)

    def backward(out):
        a.grad += (1.0 - out.values * out.values) * out.grad

    return Tensor(y, (a,), backward, "tanh")


def sigmoid(a) -> Tensor:
    a = _lift(a)
    # numerically stable split on sign
    x = a.values
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward(out):
        a.grad += out.values * (1.0 - out.values) * out.grad

    return Tensor(y, (a,), backward, "sigmoid")


def exp(a) -> Tensor:
    a = _lift(a)

    def backward(out):
        a.grad += out.values * out.grad

    return Tensor(np.exp(a.values), (a,), backward, "exp")


def log(a) -> Tensor:
    a = _lift(a)

    def backward(out):
        a.grad += out.grad / a.values

    with np.errstate(divide="ignore", invalid="ignore"):
        out_values = np.log(a.values)
    return Tensor(out_values, (a,), backward, "log")


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values into [lo, hi]; the gradient is zero where clamped."""
    inside = (a.values > lo) & (a.values < hi)

    def backward(out):
        a.grad += out.grad * inside

    return Tensor(np.clip(a.values, lo, hi), (a,), backward, "clip")


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def backward(out):
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a.grad += np.broadcast_to(g, a.values.shape)

    return Tensor(a.values.sum(axis=axis, keepdims=keepdims), (a,), backward, "sum")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Softmax along ``axis``; shift-invariant and stable for large negatives."""
    shifted = a.values - a.values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(out):
        g = out.grad
        gy = (g * out.values).sum(axis=axis, keepdims=True)
        a.grad += out.values * (g - gy)

    return Tensor(y, (a,), backward, "softmax")


# -- gradient checking --------------------------------------------------------


def grad_check(f: Callable[[list[Tensor]], Tensor], params: list[Tensor], eps: float = 1e-5) -> float:
    """Compare analytic gradients of ``f`` against central differences.

    ``f`` must be deterministic, take the parameter list and return a scalar
    Tensor built from primitives. Returns the max over all coordinates of
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)``.
    """
    if not (1e-7 <= eps <= 1e-3):
        raise ValueError(f"eps={eps} outside [1e-7, 1e-3]")
    out = f(params)
    if out.values.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    out.backward()
    analytic = [np.array(p.grad, copy=True) for p in params]

    worst = 0.0
    for p, a_full in zip(params, analytic):
        flat = p.values.reshape(-1)
        a_flat = a_full.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(f(params).values)
            flat[i] = orig - eps
            f_minus = float(f(params).values)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a_i = float(a_flat[i])
            rel = abs(a_i - numeric) / max(abs(a_i), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
