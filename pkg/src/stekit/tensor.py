"""Dense tensors with tape-based reverse-mode differentiation.

Values are stored as numpy arrays (row-major). A :class:`Tape` records every
operation whose inputs require gradients while it is active; ``Tape.grad``
then sweeps the recorded nodes in reverse creation order. Outside of a tape
the operations are plain array arithmetic with no bookkeeping.

    >>> x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    >>> with Tape() as tape:
    ...     y = sum(mul(x, x))
    >>> tape.grad(y)[x]
    array([2., 4., 6.])
"""

from __future__ import annotations

import builtins
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DimensionError

FLOAT_DTYPES = {"f32": np.float32, "f64": np.float64}

_TAPES: list["Tape"] = []


class Tensor:
    """Immutable dense array, optionally a differentiation leaf."""

    __slots__ = ("data", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        arr = arr.view()
        arr.flags.writeable = False
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return np.array(self.data)

    def item(self):
        return float(self.data)

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    def __add__(self, other):
        return add(self, _lift(other, self.dtype))

    def __radd__(self, other):
        return add(_lift(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _lift(other, self.dtype))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _lift(x, dtype):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=dtype))


@dataclass
class Node:
    op: str
    inputs: tuple
    output: Tensor
    forward: Callable
    vjp: Callable
    kwargs: dict = field(default_factory=dict)


class Tape:
    """Gradient record: the forward operations and their saved inputs."""

    def __init__(self):
        self.nodes: list[Node] = []
        self._produced: set[int] = set()
        self._leaves: dict[int, Tensor] = {}

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    @property
    def leaves(self):
        return list(self._leaves.values())

    def _push(self, node):
        for t in node.inputs:
            if t.requires_grad and id(t) not in self._produced:
                self._leaves.setdefault(id(t), t)
        self._produced.add(id(node.output))
        self.nodes.append(node)

    def grad(self, output: Tensor, wrt: Sequence[Tensor] | None = None):
        """Return ``{leaf: d output / d leaf}`` for every recorded leaf.

        Leaves in ``wrt`` that the output does not depend on get zeros.
        """
        if output.size != 1:
            raise ContractError(
                f"grad needs a scalar output, got shape {output.shape}")
        grads = {id(output): np.ones_like(output.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            datas = [t.data for t in node.inputs]
            parts = node.vjp(g, node.output.data, *datas, **node.kwargs)
            for t, gi in zip(node.inputs, parts):
                if gi is None or not t.requires_grad:
                    continue
                if id(t) in grads:
                    grads[id(t)] = grads[id(t)] + gi
                else:
                    grads[id(t)] = gi
        targets = self.leaves if wrt is None else list(wrt)
        return {t: np.asarray(grads.get(id(t), np.zeros_like(t.data)),
                              dtype=t.dtype).reshape(t.shape)
                for t in targets}

    def replay(self):
        """Recompute every node from its saved inputs; True if all match bitwise."""
        for node in self.nodes:
            out = node.forward(*[t.data for t in node.inputs], **node.kwargs)
            if not np.array_equal(np.asarray(out), node.output.data):
                return False
        return True


def grad(record: Tape, output: Tensor, wrt=None):
    return record.grad(output, wrt)


def _apply(op, forward, vjp, *inputs, **kwargs):
    out = Tensor(forward(*[t.data for t in inputs], **kwargs))
    if _TAPES and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _TAPES[-1]._push(Node(op, inputs, out, forward, vjp, kwargs))
    return out


def _unbroadcast(g, shape):
    # sums leading axes introduced by row-style broadcasting
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    return g


# ---------------------------------------------------------------- arithmetic

def _check_same_or_trailing(a, b, op):
    if a.shape == b.shape or a.shape[a.ndim - b.ndim:] == b.shape:
        return
    raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} are incompatible")


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may match the trailing axes of ``a`` (bias)."""
    _check_same_or_trailing(a, b, "add")
    return _apply("add", np.add,
                  lambda g, o, x, y: (g, _unbroadcast(g, y.shape)), a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_or_trailing(a, b, "sub")
    return _apply("sub", np.subtract,
                  lambda g, o, x, y: (g, -_unbroadcast(g, y.shape)), a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} differ")
    return _apply("mul", np.multiply, lambda g, o, x, y: (g * y, g * x), a, b)


def scale(a: Tensor, factor: float) -> Tensor:
    return _apply("scale", lambda x, factor: x * x.dtype.type(factor),
                  lambda g, o, x, factor: (g * x.dtype.type(factor),),
                  a, factor=factor)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of ``m x k`` and ``k x n`` operands."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _apply("matmul", np.matmul,
                  lambda g, o, x, y: (g @ y.T, x.T @ g), a, b)


# ------------------------------------------------------------------- shaping

def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    return _apply("reshape", lambda x, shape: x.reshape(shape),
                  lambda g, o, x, shape: (g.reshape(x.shape),), a, shape=shape)


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _apply("transpose", lambda x, axes: np.transpose(x, axes),
                  lambda g, o, x, axes: (np.transpose(g, inverse),),
                  a, axes=axes)


def _take_vjp(g, o, x, indices, axis):
    out = np.zeros_like(x)
    moved = np.moveaxis(out, axis, 0)
    np.add.at(moved, indices, np.moveaxis(g, axis, 0))
    return (out,)


def take(a: Tensor, indices, axis: int = 0) -> Tensor:
    """Gather along ``axis``; repeated indices accumulate gradient."""
    indices = np.asarray(indices, dtype=np.intp)
    if indices.size and (indices.min() < 0 or indices.max() >= a.shape[axis]):
        raise DimensionError(
            f"take: index out of range for axis {axis} of {a.shape}")
    return _apply("take", lambda x, indices, axis: np.take(x, indices, axis=axis),
                  _take_vjp, a, indices=indices, axis=axis)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Join along ``axis`` in argument order."""
    tensors = list(tensors)
    if not tensors:
        raise DimensionError("concat: no tensors given")
    ref = tensors[0].shape
    for t in tensors[1:]:
        if (t.ndim != len(ref) or
                any(s != r for i, (s, r) in enumerate(zip(t.shape, ref))
                    if i != axis % len(ref))):
            raise DimensionError(
                f"concat: shapes {ref} and {t.shape} differ off axis {axis}")
    if len(tensors) == 1:
        return tensors[0]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def fwd(*xs, axis):
        return np.concatenate(xs, axis=axis)

    def vjp(g, o, *xs, axis):
        return tuple(np.split(g, cuts, axis=axis))

    return _apply("concat", fwd, vjp, *tensors, axis=axis)


def split(a: Tensor, sizes: Sequence[int], axis: int = 0) -> list[Tensor]:
    """Inverse of :func:`concat` for the given extents."""
    if builtins.sum(sizes) != a.shape[axis]:
        raise DimensionError(
            f"split: sizes {list(sizes)} do not cover axis {axis} of {a.shape}")
    out, start = [], 0
    for s in sizes:
        out.append(take(a, np.arange(start, start + s), axis=axis))
        start += s
    return out


# ---------------------------------------------------------------- reductions

def sum(a: Tensor, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy
    def vjp(g, o, x, axis):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return _apply("sum", lambda x, axis: np.sum(x, axis=axis), vjp, a, axis=axis)


def mean(a: Tensor, axis=None) -> Tensor:
    n = a.size if axis is None else a.shape[axis]
    return scale(sum(a, axis=axis), 1.0 / n)


def pooled_mean(a: Tensor, axes: Sequence[int]) -> Tensor:
    """Mean over ``axes`` that is bitwise invariant to reordering along them.

    Values are sorted before summation, so any permutation of the pooled
    positions produces the identical result.
    """
    axes = tuple(ax % a.ndim for ax in axes)
    keep = [ax for ax in range(a.ndim) if ax not in axes]
    n = int(np.prod([a.shape[ax] for ax in axes]))
    out_shape = tuple(a.shape[ax] for ax in keep)

    def fwd(x, axes):
        flat = np.transpose(x, axes + tuple(keep)).reshape((n,) + out_shape)
        return np.sort(flat, axis=0).sum(axis=0) / x.dtype.type(n)

    def vjp(g, o, x, axes):
        full = np.broadcast_to(np.expand_dims(g, axes), x.shape)
        return (full / x.dtype.type(n),)

    return _apply("pooled_mean", fwd, vjp, a, axes=axes)


# --------------------------------------------------------------- nonlinear

def tanh(a: Tensor) -> Tensor:
    return _apply("tanh", np.tanh, lambda g, o, x: (g * (1 - o * o),), a)


_GELU_C = math.sqrt(2.0 / math.pi)


def _gelu(x):
    c = x.dtype.type(_GELU_C)
    return 0.5 * x * (1 + np.tanh(c * (x + 0.044715 * x ** 3)))


def _gelu_vjp(g, o, x):
    c = x.dtype.type(_GELU_C)
    u = c * (x + 0.044715 * x ** 3)
    th = np.tanh(u)
    du = c * (1 + 3 * 0.044715 * x * x)
    return (g * (0.5 * (1 + th) + 0.5 * x * (1 - th * th) * du),)


def gelu(a: Tensor) -> Tensor:
    """Tanh-approximated GELU."""
    return _apply("gelu", _gelu, _gelu_vjp, a)


def _log_softmax(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def log_softmax(a: Tensor) -> Tensor:
    """Log-softmax over the last axis."""
    return _apply("log_softmax", _log_softmax,
                  lambda g, o, x: (g - np.exp(o) * g.sum(axis=-1, keepdims=True),),
                  a)


def finite(t: Tensor) -> bool:
    return bool(np.all(np.isfinite(t.data)))
