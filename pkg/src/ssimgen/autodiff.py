"""Reverse-mode differentiation over dense numpy tensors.

Every op builds a new :class:`Tensor` holding its parents and a closure
mapping the output gradient to parent gradients; :func:`backward` walks the
recorded graph in reverse topological order, visiting each node once.
Any op that produces NaN or Inf raises immediately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NonFiniteValue, NotScalarOutput, ShapeMismatch

SQRT_TOL = 1e-12


class Tensor:
    __slots__ = ("data", "parents", "_backward", "op", "grad")
    __array_priority__ = 100.0

    def __init__(self, data, parents: tuple = (), backward=None, op: str = "leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.parents = parents
        self._backward = backward
        self.op = op
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, k):
        if k == 2:
            return square(self)
        return power(self, k)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)

    def backward(self):
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, op="const")


def _node(out, parents, fn, op: str) -> Tensor:
    out = np.asarray(out, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise NonFiniteValue(f"{op} produced a non-finite value")
    return Tensor(out, parents, fn, op)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _broadcast_shape(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from exc


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    return _node(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    return _node(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    return _node(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = a.data / b.data

    def fn(g):
        return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)

    return _node(out, (a, b), fn, "div")


def square(x) -> Tensor:
    x = as_tensor(x)
    return _node(x.data * x.data, (x,), lambda g: (2.0 * x.data * g,), "square")


def power(x, k: float) -> Tensor:
    x = as_tensor(x)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = x.data**k
    return _node(out, (x,), lambda g: (k * x.data ** (k - 1) * g,), "power")


def sqrt(x) -> Tensor:
    """Square root; inputs in [-1e-12, 0) clamp to 0, the gradient at 0 is 0."""
    x = as_tensor(x)
    if np.any(x.data < -SQRT_TOL):
        raise DomainError(f"sqrt of negative value {float(np.min(x.data))}")
    out = np.sqrt(np.maximum(x.data, 0.0))

    def fn(g):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, g / (2.0 * safe), 0.0),)

    return _node(out, (x,), fn, "sqrt")


def exp(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(over="ignore"):
        out = np.exp(x.data)
    return _node(out, (x,), lambda g: (g * out,), "exp")


def log(x) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data <= 0):
        raise DomainError(f"log of non-positive value {float(np.min(x.data))}")
    return _node(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _node(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return _node(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return _node(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def softplus(x) -> Tensor:
    """log(1 + e^x), evaluated stably."""
    x = as_tensor(x)
    sig = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _node(np.logaddexp(0.0, x.data), (x,), lambda g: (g * sig,), "softplus")


def identity(x) -> Tensor:
    return as_tensor(x)


# ---------------------------------------------------------------- reductions


def _axes(ndim, axis):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tsum(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)
    axes = _axes(x.ndim, axis)

    def fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _node(out, (x,), fn, "sum")


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    n = int(np.prod([x.shape[a] for a in _axes(x.ndim, axis)]))
    return div(tsum(x, axis, keepdims), float(n))


def variance(x, axis=-1, keepdims=False) -> Tensor:
    """Sample variance with the 1/(q-1) denominator."""
    x = as_tensor(x)
    axes = _axes(x.ndim, axis)
    n = int(np.prod([x.shape[a] for a in axes]))
    if n < 2:
        raise ShapeMismatch("variance needs at least two entries along the axis")
    centred = x.data - x.data.mean(axis=axes, keepdims=True)
    out = np.sum(centred * centred, axis=axes, keepdims=keepdims) / (n - 1)

    def fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (2.0 * centred * g / (n - 1),)

    return _node(out, (x,), fn, "variance")


# ---------------------------------------------------------------- linear algebra / shape


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    try:
        out = a.data @ b.data
    except ValueError as exc:
        raise ShapeMismatch(f"matmul: {exc}") from exc

    def fn(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _node(out, (a, b), fn, "matmul")


def affine(x, w, b) -> Tensor:
    """x @ w + b."""
    return add(matmul(x, w), b)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc
    return _node(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(axes)
    inv = np.argsort(axes)
    return _node(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),), "transpose")


def getitem(x, key) -> Tensor:
    x = as_tensor(x)
    out = x.data[key]

    def fn(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, key, g)
        return (gx,)

    return _node(out, (x,), fn, "slice")


def take(x, idx: np.ndarray) -> Tensor:
    """Gather along the last axis: out[..., *idx.shape] = x[..., idx]."""
    x = as_tensor(x)
    idx = np.asarray(idx)
    out = x.data[..., idx]
    lead = x.shape[:-1]

    def fn(g):
        gflat = g.reshape(int(np.prod(lead, dtype=int)), idx.size)
        gx = np.zeros((x.shape[-1], gflat.shape[0]))
        np.add.at(gx, idx.reshape(-1), gflat.T)
        return (gx.T.reshape(x.shape),)

    return _node(out, (x,), fn, "take")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(f"concat: {exc}") from exc
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _node(out, tuple(ts), lambda g: tuple(np.split(g, bounds, axis=axis)), "concat")


# ---------------------------------------------------------------- backward


def _topo(output: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(output, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(output: Tensor, leaves: Sequence[Tensor] = ()) -> list[np.ndarray]:
    """Accumulate d(output)/d(node) into ``node.grad`` for the whole graph.

    Returns the gradients of ``leaves`` (zeros for leaves the output does not
    depend on).
    """
    if output.data.size != 1:
        raise NotScalarOutput(f"backward needs a scalar output, got shape {output.shape}")
    grads = {id(output): np.ones_like(output.data)}
    for node in reversed(_topo(output)):
        g = grads.get(id(node))
        node.grad = g if g is not None else np.zeros_like(node.data)
        if g is None or node._backward is None:
            continue
        for parent, pg in zip(node.parents, node._backward(g)):
            if pg is None:
                continue
            if not np.all(np.isfinite(pg)):
                raise NonFiniteValue(f"non-finite gradient flowing out of {node.op}")
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg
    out = []
    for leaf in leaves:
        g = grads.get(id(leaf))
        if g is None:
            g = np.zeros_like(leaf.data)
            leaf.grad = g
        out.append(g)
    return out


def value_and_grad(f: Callable, params: Sequence[np.ndarray]):
    """Evaluate scalar ``f(*tensors)`` and its gradients w.r.t. ``params``."""
    leaves = [Tensor(p) for p in params]
    out = f(*leaves)
    return out.item(), backward(out, leaves)


def grad_check(f: Callable[[Tensor], Tensor], point, eps: float = 1e-5) -> float:
    """Largest |numeric - analytic| / max(1, |analytic|) over all coordinates.

    Numeric derivatives are central differences with step ``eps``.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    x0 = np.array(point, dtype=float)
    x = Tensor(x0.copy())
    (analytic,) = backward(f(x), [x])
    err = 0.0
    flat = x0.reshape(-1)
    for i in range(flat.size):
        up, dn = flat.copy(), flat.copy()
        up[i] += eps
        dn[i] -= eps
        fu = f(Tensor(up.reshape(x0.shape))).item()
        fd = f(Tensor(dn.reshape(x0.shape))).item()
        num = (fu - fd) / (2 * eps)
        ana = analytic.reshape(-1)[i]
        err = max(err, abs(num - ana) / max(1.0, abs(ana)))
    return err


# ---------------------------------------------------------------- SSIM composite


def centre(x) -> Tensor:
    return sub(x, mean(x, axis=-1, keepdims=True))


def ssim_dist2_diff(x, y, c: float, center: bool = True) -> Tensor:
    """|x - y|^2 / (|x|^2 + |y|^2 + c) over the last axis.

    Both blocks are mean-centred inside the graph unless ``center`` is off.
    A 1-D pair gives a scalar node; stacked blocks give one value per block.
    """
    x, y = as_tensor(x), as_tensor(y)
    if x.shape[-1] != y.shape[-1]:
        raise ShapeMismatch(f"block lengths differ: {x.shape} vs {y.shape}")
    if not c > 0:
        raise ValueError("c must be positive")
    if center:
        x, y = centre(x), centre(y)
    num = tsum(square(x - y), axis=-1)
    den = tsum(square(x), axis=-1) + tsum(square(y), axis=-1) + c
    return num / den


# ---------------------------------------------------------------- Adam


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float = 1e-3, **kw) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0, lr, **kw)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState):
    """One bias-corrected Adam update; returns (new params, state)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params, grads and Adam state must align")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**state.t
    corr2 = 1.0 - b2**state.t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape or p.shape != state.m[i].shape:
            raise ShapeMismatch(f"parameter {i}: {p.shape} vs gradient {g.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / corr1
        v_hat = state.v[i] / corr2
        out.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return out, state


