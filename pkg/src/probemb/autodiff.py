"""Minimal reverse-mode automatic differentiation over float64 ndarrays.

A computation graph is built dynamically: each Node holds its value, its
parent Nodes and one vector-Jacobian-product callback per parent.
gradients() walks the graph in reverse topological order and accumulates
adjoints.  Everything is float64; values must be finite (a NaN/Inf raises
immediately, which is how training divergence is detected).

Supported primitives: add, mul, matmul, power (constant exponent), exp,
log, relu, softplus, l2_normalize, concat, indexing/slicing, take,
reduce_sum, reduce_mean, log_sum_exp and log_bessel_i (constant order,
differentiated in x).  Subtraction, division, sqrt, sigmoid and clip are
provided as compositions of these.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from . import special
from .errors import ContractError, DegenerateInputError, NonFiniteError

Array = np.ndarray


def _as_value(x) -> Array:
    v = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("non-finite value entering the computation graph")
    return v


class Node:
    """One value in the computation graph.

    parents/vjps describe how an output adjoint maps back onto each input;
    trainable marks the node as a parameter for gradients().
    """

    __slots__ = ("value", "parents", "vjps", "trainable", "name")

    def __init__(self, value, parents: tuple = (), vjps: tuple = (),
                 trainable: bool = False, name: str = ""):
        self.value = _as_value(value)
        self.parents = parents
        self.vjps = vjps
        self.trainable = trainable
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Node{tag}(shape={self.value.shape}, trainable={self.trainable})"

    # operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -as_node(other))

    def __rsub__(self, other):
        return add(as_node(other), -self)

    def __truediv__(self, other):
        return mul(self, power(as_node(other), -1.0))

    def __rtruediv__(self, other):
        return mul(as_node(other), power(self, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        value = self.value[idx]

        def vjp(g, idx=idx, shape=self.value.shape):
            out = np.zeros(shape)
            out[idx] = g
            return out

        return Node(value, (self,), (vjp,))


def as_node(x) -> Node:
    return x if isinstance(x, Node) else Node(x)


def parameter(value, name: str = "") -> Node:
    return Node(np.array(value, dtype=np.float64), trainable=True, name=name)


def constant(value, name: str = "") -> Node:
    return Node(value, name=name)


def _unbroadcast(grad: Array, shape: tuple) -> Array:
    """Sum a broadcast gradient back to the given shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# primitives ---------------------------------------------------------

def add(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    value = a.value + b.value
    return Node(value, (a, b), (
        lambda g: _unbroadcast(g, a.value.shape),
        lambda g: _unbroadcast(g, b.value.shape),
    ))


def mul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    value = a.value * b.value
    return Node(value, (a, b), (
        lambda g: _unbroadcast(g * b.value, a.value.shape),
        lambda g: _unbroadcast(g * a.value, b.value.shape),
    ))


def matmul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    value = a.value @ b.value

    def vjp_a(g):
        return _unbroadcast(g @ np.swapaxes(b.value, -1, -2), a.value.shape)

    def vjp_b(g):
        return _unbroadcast(np.swapaxes(a.value, -1, -2) @ g, b.value.shape)

    return Node(value, (a, b), (vjp_a, vjp_b))


def transpose(a) -> Node:
    a = as_node(a)
    value = np.swapaxes(a.value, -1, -2)
    return Node(value, (a,), (lambda g: np.swapaxes(g, -1, -2),))


def reshape(a, shape) -> Node:
    a = as_node(a)
    return Node(a.value.reshape(shape), (a,),
                (lambda g: g.reshape(a.value.shape),))


def power(a, p: float) -> Node:
    a = as_node(a)
    p = float(p)
    value = a.value ** p

    def vjp(g):
        return g * p * a.value ** (p - 1.0)

    return Node(value, (a,), (vjp,))


def exp(a) -> Node:
    a = as_node(a)
    value = np.exp(a.value)
    return Node(value, (a,), (lambda g: g * value,))


def log(a) -> Node:
    a = as_node(a)
    return Node(np.log(a.value), (a,), (lambda g: g / a.value,))


def relu(a) -> Node:
    a = as_node(a)
    mask = a.value > 0.0  # subgradient 0 at the kink
    return Node(a.value * mask, (a,), (lambda g: g * mask,))


def softplus(a) -> Node:
    a = as_node(a)
    v = a.value
    value = np.maximum(v, 0.0) + np.log1p(np.exp(-np.abs(v)))
    sig = 1.0 / (1.0 + np.exp(-np.clip(v, -700, 700)))
    return Node(value, (a,), (lambda g: g * sig,))


def l2_normalize(a, axis: int = -1) -> Node:
    a = as_node(a)
    norm = np.linalg.norm(a.value, axis=axis, keepdims=True)
    if np.any(norm == 0.0):
        raise DegenerateInputError("l2_normalize: zero-norm input")
    y = a.value / norm

    def vjp(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        return (g - y * inner) / norm

    return Node(y, (a,), (vjp,))


def concat(nodes: Sequence[Node], axis: int = -1) -> Node:
    nodes = [as_node(n) for n in nodes]
    value = np.concatenate([n.value for n in nodes], axis=axis)
    sizes = [n.value.shape[axis] for n in nodes]
    offsets = np.cumsum([0] + sizes)

    def make_vjp(i):
        sl = [slice(None)] * value.ndim
        sl[axis] = slice(offsets[i], offsets[i + 1])
        sl = tuple(sl)
        return lambda g: g[sl]

    return Node(value, tuple(nodes), tuple(make_vjp(i) for i in range(len(nodes))))


def take(a, indices, axis: int = 0) -> Node:
    """Gather rows (or entries along axis) by integer index array."""
    a = as_node(a)
    idx = np.asarray(indices)
    value = np.take(a.value, idx, axis=axis)

    def vjp(g):
        out = np.zeros(a.value.shape)
        np.add.at(out, (slice(None),) * axis + (idx,), g)
        return out

    return Node(value, (a,), (vjp,))


def reduce_sum(a, axis=None, keepdims: bool = False) -> Node:
    a = as_node(a)
    value = a.value.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, a.value.shape).copy()
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, a.value.shape).copy()

    return Node(value, (a,), (vjp,))


def reduce_mean(a, axis=None, keepdims: bool = False) -> Node:
    a = as_node(a)
    count = a.value.size if axis is None else a.value.shape[axis]
    return mul(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def log_sum_exp(a, axis=None, keepdims: bool = False) -> Node:
    a = as_node(a)
    m = a.value.max(axis=axis, keepdims=True)
    value = np.log(np.exp(a.value - m).sum(axis=axis, keepdims=True)) + m
    soft = np.exp(a.value - value)  # softmax weights
    if not keepdims:
        value = value if axis is None else np.squeeze(value, axis=axis)
        if axis is None:
            value = value.reshape(())

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, a.value.shape) * soft
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, a.value.shape) * soft

    return Node(value, (a,), (vjp,))


def log_bessel_i(order: float, x: Node) -> Node:
    """Elementwise log I_order(x); order is a constant, gradient flows in x.

    d/dx log I_v(x) is evaluated with the ratio continued fraction rather
    than by differencing, which stays stable at large x.
    """
    x = as_node(x)
    value = special.log_bessel_i(order, x.value)

    def vjp(g):
        return g * special.log_bessel_i_dx(order, x.value)

    return Node(value, (x,), (vjp,))


def clip(a, lo: float, hi: float) -> Node:
    """Clamp values into [lo, hi]; subgradient 0 at and outside the bounds.

    In-range values pass through bit-exactly.
    """
    a = as_node(a)
    mask = (a.value > lo) & (a.value < hi)
    return Node(np.clip(a.value, lo, hi), (a,), (lambda g: g * mask,))


# compositions -------------------------------------------------------

def sqrt(a) -> Node:
    return power(a, 0.5)


def sigmoid(a) -> Node:
    """Stable logistic function: exp(-softplus(-x))."""
    return exp(-softplus(-as_node(a)))


# reverse pass -------------------------------------------------------

def _topo_order(output: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(output, False)]
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


def gradients(output: Node, params: Iterable[Node]) -> dict[Node, Array]:
    """d(output)/d(param) for each trainable param, by reverse accumulation.

    output must hold a single scalar value.
    """
    params = list(params)
    if output.value.size != 1:
        raise ContractError(
            f"gradients: output must be scalar, got shape {output.value.shape}")
    for p in params:
        if not p.trainable:
            raise ContractError("gradients: every requested param must be trainable")
    adj: dict[int, Array] = {id(output): np.ones_like(output.value)}
    order = _topo_order(output)
    for node in reversed(order):
        g = adj.get(id(node))
        if g is None:
            continue
        for parent, vjp in zip(node.parents, node.vjps):
            contrib = vjp(g)
            key = id(parent)
            if key in adj:
                adj[key] = adj[key] + contrib
            else:
                adj[key] = np.asarray(contrib, dtype=np.float64)
    result: dict[Node, Array] = {}
    for p in params:
        result[p] = adj.get(id(p), np.zeros_like(p.value))
    for p, g in result.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter {p.name!r}")
    return result
