"""Reverse-mode automatic differentiation over numpy arrays.

Every op returns a :class:`Tensor`.  When grad mode is on and any input
requires a gradient, the output keeps links to its inputs plus a backward
rule.  :func:`backward` collects the reachable graph into a :class:`Tape`
(inputs always precede outputs) and runs the rules in reverse.

Complex convention: the gradient stored for a complex tensor ``z`` is
``dL/dRe(z) + i dL/dIm(z)``.  A real step ``z - lr * grad`` therefore lowers
the real loss to first order.  With this convention a holomorphic op
``y = f(x)`` propagates ``G_x = conj(f'(x)) G_y``; gradients flowing into a
real tensor keep only their real part.
"""
from __future__ import annotations

import contextlib
import contextvars

import numpy as np
from scipy.special import erf

from ..errors import DtypeError, GraphError, InvalidArgument, ShapeError
from . import fft as _fft

_grad_enabled = contextvars.ContextVar("nokit_grad_enabled", default=True)


@contextlib.contextmanager
def no_grad():
    """Run ops without recording a graph."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def grad_enabled() -> bool:
    return _grad_enabled.get()


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data)
    if np.iscomplexobj(arr):
        return arr.astype(np.complex128, copy=False)
    return arr.astype(np.float64, copy=False)


class Tensor:
    """Dense float64 or complex128 array with an optional graph node."""

    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.data)

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self):
        return self.data.item()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self):
        return self.shape[0]

    # -- operators ---------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    # -- method forms -------------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)

    def conj(self):
        return conj(self)

    @property
    def real(self):
        return real(self)

    @property
    def imag(self):
        return imag(self)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, rule) -> Tensor:
    out = Tensor(data)
    if _grad_enabled.get() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = rule
    return out


def _forward(fn, *arrays):
    """Evaluate a numpy forward, mapping numpy shape errors to ShapeError."""
    try:
        return fn(*arrays)
    except ValueError as exc:
        shapes = ", ".join(str(a.shape) for a in arrays)
        raise ShapeError(f"incompatible shapes {shapes}: {exc}") from None


def _real_only(x: Tensor, op: str):
    if x.is_complex:
        raise DtypeError(f"{op} is defined for real tensors only")


# -- graph traversal ---------------------------------------------------------
class Tape:
    """Recorded operations in topological order (inputs precede outputs)."""

    def __init__(self, nodes):
        self.nodes = list(nodes)

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    @classmethod
    def from_output(cls, out: Tensor) -> "Tape":
        order, seen = [], set()
        stack = [(out, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        return cls(order)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _fit(g, like: Tensor) -> np.ndarray:
    g = _unbroadcast(np.asarray(g), like.shape)
    if not like.is_complex and np.iscomplexobj(g):
        g = g.real
    return g


def backward(loss: Tensor, grad=None) -> Tape:
    """Accumulate ``dloss/dleaf`` into ``leaf.grad`` for every reachable leaf."""
    if not isinstance(loss, Tensor):
        raise InvalidArgument("backward expects a Tensor")
    if grad is None:
        if loss.size != 1:
            raise InvalidArgument(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss.is_complex:
            raise InvalidArgument("backward needs a real loss")
        grad = np.ones(loss.shape)
    if not loss.requires_grad:
        raise GraphError("loss is detached from any graph (no input requires a gradient)")
    tape = Tape.from_output(loss)
    grads = {id(loss): np.asarray(grad, dtype=loss.dtype)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            pg = _fit(pg, p)
            key = id(p)
            grads[key] = pg if key not in grads else grads[key] + pg
    return tape


# -- elementwise arithmetic ----------------------------------------------------
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(_forward(np.add, a.data, b.data), (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(_forward(np.subtract, a.data, b.data), (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(_forward(np.multiply, a.data, b.data), (a, b),
                 lambda g: (g * np.conj(b.data), g * np.conj(a.data)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _forward(np.divide, a.data, b.data)

    def rule(g):
        gb = np.conj(b.data)
        return g / gb, -g * np.conj(out) / gb

    return _make(out, (a, b), rule)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def scale(a, c: float) -> Tensor:
    return mul(a, c)


def conj(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.conj(a.data), (a,), lambda g: (np.conj(g),))


def real(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.real.copy(), (a,), lambda g: (g.astype(a.dtype),))


def imag(a) -> Tensor:
    a = as_tensor(a)
    # y = Im z: dL/dIm z = g, so the complex gradient is i g
    return _make(a.data.imag.copy(), (a,), lambda g: (1j * g if a.is_complex else np.zeros_like(g),))


def abs2(a) -> Tensor:
    """Squared magnitude ``|a|^2`` (real output)."""
    a = as_tensor(a)
    out = (a.data * np.conj(a.data)).real if a.is_complex else a.data * a.data
    return _make(out, (a,), lambda g: (2.0 * a.data * g,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * np.conj(out),))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    _real_only(a, "sqrt")
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g / (2.0 * out),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    _real_only(a, "tanh")
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


_SQRT1_2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a) -> Tensor:
    """Exact GELU ``x Phi(x)``."""
    a = as_tensor(a)
    _real_only(a, "gelu")
    x = a.data
    cdf = 0.5 * (1.0 + erf(x * _SQRT1_2))

    def rule(g):
        return (g * (cdf + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)),)

    return _make(x * cdf, (a,), rule)


def relu(a) -> Tensor:
    a = as_tensor(a)
    _real_only(a, "relu")
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def identity(a) -> Tensor:
    return as_tensor(a)


def softmax(a, axis: int = -1, weights=None) -> Tensor:
    """Softmax along ``axis``; with ``weights`` computes ``w e^x / sum(w e^x)``.

    The max logit is subtracted first, which leaves the result unchanged.
    """
    a = as_tensor(a)
    _real_only(a, "softmax")
    x = a.data
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    if weights is not None:
        w = np.asarray(weights.data if isinstance(weights, Tensor) else weights, dtype=np.float64)
        e = _forward(np.multiply, e, w)
    y = e / e.sum(axis=axis, keepdims=True)

    def rule(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make(y, (a,), rule)


# -- linear algebra and shape ops ---------------------------------------------
def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs operands with ndim >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    flat = b.ndim == 2 and a.ndim > 2
    if flat:
        # one GEMM over all leading axes
        k = a.shape[-1]
        out = (a.data.reshape(-1, k) @ b.data).reshape(a.shape[:-1] + (b.shape[-1],))
    else:
        out = _forward(np.matmul, a.data, b.data)

    def rule(g):
        if flat:
            g2 = g.reshape(-1, g.shape[-1])
            ga = (g2 @ np.conj(b.data.T)).reshape(a.shape) if a.requires_grad else None
            gb = np.conj(a.data.reshape(-1, a.shape[-1]).T) @ g2 if b.requires_grad else None
            return ga, gb
        ga = g @ np.conj(np.swapaxes(b.data, -1, -2)) if a.requires_grad else None
        gb = np.conj(np.swapaxes(a.data, -1, -2)) @ g if b.requires_grad else None
        return ga, gb

    return _make(out, (a, b), rule)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out = _forward(lambda x: x.reshape(shape), a.data)
    return _make(out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(int(ax) % a.ndim for ax in axes)
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def swapaxes(a, i: int, j: int) -> Tensor:
    a = as_tensor(a)
    axes = list(range(a.ndim))
    axes[i], axes[j] = axes[j], axes[i]
    return transpose(a, axes)


def moveaxis(a, source: int, dest: int) -> Tensor:
    a = as_tensor(a)
    axes = list(range(a.ndim))
    src = source % a.ndim
    axes.pop(src)
    axes.insert(dest % a.ndim, src)
    return transpose(a, axes)


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)
    out = a.data[idx]

    def rule(g):
        full = np.zeros(a.shape, dtype=g.dtype)
        np.add.at(full, idx, g)
        return (full,)

    return _make(np.array(out, copy=True), (a,), rule)


def take(a, indices, axis: int) -> Tensor:
    """Gather along ``axis`` (indices may repeat)."""
    a = as_tensor(a)
    indices = np.asarray(indices, dtype=np.int64)
    axis %= a.ndim
    out = np.take(a.data, indices, axis=axis)

    unique = len(np.unique(indices)) == indices.size

    def rule(g):
        full = np.zeros(a.shape, dtype=g.dtype)
        gm = np.moveaxis(g, list(range(axis, axis + indices.ndim)), list(range(indices.ndim)))
        if unique:
            np.moveaxis(full, axis, 0)[indices] = gm
        else:
            np.add.at(np.moveaxis(full, axis, 0), indices, gm)
        return (full,)

    return _make(out, (a,), rule)


def embed(a, indices, size: int, axis: int) -> Tensor:
    """Place slices of ``a`` at distinct ``indices`` of a zero array of length ``size``."""
    a = as_tensor(a)
    indices = np.asarray(indices, dtype=np.int64)
    axis %= a.ndim
    if len(np.unique(indices)) != len(indices) or indices.shape[0] != a.shape[axis]:
        raise InvalidArgument("embed needs one distinct index per slice")
    shape = list(a.shape)
    shape[axis] = size
    out = np.zeros(shape, dtype=a.dtype)
    sl = [slice(None)] * a.ndim
    sl[axis] = indices
    out[tuple(sl)] = a.data
    return _make(out, (a,), lambda g: (np.take(g, indices, axis=axis),))


def segment_sum(a, index, size: int, axis: int) -> Tensor:
    """Scatter-add slices of ``a`` along ``axis`` into ``size`` buckets given by ``index``."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    axis %= a.ndim
    if index.shape != (a.shape[axis],):
        raise ShapeError(f"segment index of shape {index.shape} for axis of length {a.shape[axis]}")
    shape = list(a.shape)
    shape[axis] = size
    out = np.zeros(shape, dtype=a.dtype)
    if len(np.unique(index)) == index.size:
        np.moveaxis(out, axis, 0)[index] = np.moveaxis(a.data, axis, 0)
    else:
        np.add.at(np.moveaxis(out, axis, 0), index, np.moveaxis(a.data, axis, 0))
    return _make(out, (a,), lambda g: (np.take(g, index, axis=axis),))


def concatenate(tensors, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    out = _forward(lambda *xs: np.concatenate(xs, axis=axis), *[t.data for t in ts])
    ax = axis % out.ndim
    bounds = np.cumsum([0] + [t.shape[ax] for t in ts])

    def rule(g):
        return tuple(np.take(g, np.arange(bounds[k], bounds[k + 1]), axis=ax) for k in range(len(ts)))

    return _make(out, ts, rule)


def stack(tensors, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    expanded = [reshape(t, t.shape[:axis % (t.ndim + 1)] + (1,) + t.shape[axis % (t.ndim + 1):]) for t in ts]
    return concatenate(expanded, axis=axis)


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape),)

    return _make(out, (a,), rule)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if np.isscalar(axis) else tuple(axis)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return mul(sum_(a, axis, keepdims), 1.0 / count)


# -- Fourier transforms ---------------------------------------------------------
def fft(a, axis: int = -1, allow_dft: bool = False) -> Tensor:
    a = as_tensor(a)
    out = _fft.fft(a.data, axis, allow_dft)
    n = a.shape[axis]
    return _make(out, (a,), lambda g: (n * _fft.ifft(g, axis, allow_dft),))


def ifft(a, axis: int = -1, allow_dft: bool = False) -> Tensor:
    a = as_tensor(a)
    out = _fft.ifft(a.data, axis, allow_dft)
    n = a.shape[axis]
    return _make(out, (a,), lambda g: (_fft.fft(g, axis, allow_dft) / n,))


def _edge_factor(m: int, n: int, axis: int, ndim: int) -> np.ndarray:
    """1 for the zero mode and the Nyquist mode, 2 for modes that pair up."""
    k = np.arange(m)
    c = np.where((k == 0) | (2 * k == n), 1.0, 2.0)
    shape = [1] * ndim
    shape[axis] = m
    return c.reshape(shape)


def rfft(a, axis: int = -1, allow_dft: bool = False) -> Tensor:
    a = as_tensor(a)
    _real_only(a, "rfft")
    axis %= a.ndim
    n = a.shape[axis]
    out = _fft.rfft(a.data, axis, allow_dft)

    def rule(g):
        # adjoint of the half-spectrum DFT, realised as a scaled irfft
        h = g / _edge_factor(g.shape[axis], n, axis, g.ndim)
        return (n * _fft.irfft(h, n, axis, allow_dft),)

    return _make(out, (a,), rule)


def irfft(a, n: int | None = None, axis: int = -1, allow_dft: bool = False,
          source_n: int | None = None) -> Tensor:
    a = as_tensor(a)
    axis %= a.ndim
    m = a.shape[axis]
    if n is None:
        n = 2 * (m - 1)
    source_n = _fft.source_length(m, n, source_n)
    out = _fft.irfft(a.data, n, axis, allow_dft, source_n=source_n)

    def rule(g):
        spec = _fft.rfft(g, axis, allow_dft)
        spec = np.take(spec, np.arange(m), axis=axis)
        return (spec * _edge_factor(m, n, axis, g.ndim) / source_n,)

    return _make(out, (a,), rule)


def rfftn(a, axes=(-2, -1), allow_dft: bool = False) -> Tensor:
    """Real transform on the last listed axis, full transforms on the rest."""
    axes = tuple(axes)
    out = rfft(a, axes[-1], allow_dft)
    for ax in axes[:-1]:
        out = fft(out, ax, allow_dft)
    return out


def irfftn(a, s, axes=(-2, -1), allow_dft: bool = False) -> Tensor:
    """Inverse of :func:`rfftn` at output lengths ``s`` (no zero-padding on full axes)."""
    axes = tuple(axes)
    out = as_tensor(a)
    for ax in axes[:-1]:
        out = ifft(out, ax, allow_dft)
    return irfft(out, s[-1], axes[-1], allow_dft, source_n=s[-1])
