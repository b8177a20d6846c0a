"""Array-valued reverse-mode differentiation.

Every operation appends a node to an implicit, append-only tape: nodes carry a
monotonically increasing index, so sorting the nodes reachable from a loss by
decreasing index is a valid reverse topological order.

Vector-Jacobian products are themselves written with tape operations. When
``grad(..., create_graph=True)`` is used, the backward pass is recorded and can
be differentiated again; this is what the gradient penalty needs (gradient of
an input-gradient norm with respect to the network parameters).
"""
from __future__ import annotations

import contextlib
import itertools

import numpy as np

from waemdp.errors import CycleDetected, NonScalarLoss, ShapeMismatch

_ids = itertools.count()
_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


@contextlib.contextmanager
def enable_grad():
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = True
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    __slots__ = ("value", "parents", "vjp", "requires_grad", "name", "index", "op")

    def __init__(self, value, requires_grad=False, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = ()
        self.vjp = None
        self.requires_grad = requires_grad
        self.name = name
        self.index = next(_ids)
        self.op = "leaf"

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def T(self):
        return transpose(self)

    def numpy(self):
        return self.value

    def detach(self):
        return Tensor(self.value)

    def __repr__(self):
        flag = ", requires_grad" if self.requires_grad else ""
        return f"Tensor({self.op}, shape={self.shape}{flag})"

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

    def __getitem__(self, key):
        return take(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, parents, vjp, op):
    out = Tensor(value)
    out.op = op
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = parents
        out.vjp = vjp
    return out


# -- shape plumbing ---------------------------------------------------------

def sum_to(x, shape):
    """Sum a broadcast result back down to ``shape``."""
    x = as_tensor(x)
    shape = tuple(shape)
    if x.shape == shape:
        return x
    lead = x.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        i + lead for i, n in enumerate(shape) if n == 1 and x.shape[i + lead] != 1
    )
    value = x.value.sum(axis=axes, keepdims=True)
    if lead:
        value = value.reshape(value.shape[lead:])
    src = x.shape
    return _node(value, (x,), lambda g: (broadcast_to(g, src),), "sum_to")


def broadcast_to(x, shape):
    x = as_tensor(x)
    shape = tuple(shape)
    if x.shape == shape:
        return x
    src = x.shape
    return _node(np.broadcast_to(x.value, shape), (x,), lambda g: (sum_to(g, src),), "broadcast")


def reshape(x, shape):
    x = as_tensor(x)
    src = x.shape
    return _node(x.value.reshape(shape), (x,), lambda g: (reshape(g, src),), "reshape")


def transpose(x):
    x = as_tensor(x)
    return _node(x.value.T, (x,), lambda g: (transpose(g),), "transpose")


def take(x, key):
    """Basic (slice/integer) indexing."""
    x = as_tensor(x)
    src = x.shape
    return _node(x.value[key], (x,), lambda g: (scatter(g, key, src),), "take")


def scatter(x, key, shape):
    """Embed ``x`` at ``key`` inside a zero array of ``shape`` (adjoint of take)."""
    x = as_tensor(x)
    value = np.zeros(shape)
    value[key] = x.value
    return _node(value, (x,), lambda g: (take(g, key),), "scatter")


def concat(xs, axis=-1):
    xs = [as_tensor(x) for x in xs]
    value = np.concatenate([x.value for x in xs], axis=axis)
    ax = axis % value.ndim
    bounds = np.cumsum([0] + [x.shape[ax] for x in xs])

    def vjp(g):
        out = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            key = [slice(None)] * value.ndim
            key[ax] = slice(int(lo), int(hi))
            out.append(take(g, tuple(key)))
        return tuple(out)

    return _node(value, tuple(xs), vjp, "concat")


# -- arithmetic ----------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _node(a.value + b.value, (a, b), lambda g: (sum_to(g, sa), sum_to(g, sb)), "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _node(a.value - b.value, (a, b), lambda g: (sum_to(g, sa), sum_to(neg(g), sb)), "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    def vjp(g):
        ga = sum_to(mul(g, b), sa) if a.requires_grad else None
        gb = sum_to(mul(g, a), sb) if b.requires_grad else None
        return ga, gb

    return _node(a.value * b.value, (a, b), vjp, "mul")


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def vjp(g):
        ga = div(g, b)
        gb = neg(div(mul(ga, a), b))
        return sum_to(ga, sa), sum_to(gb, sb)

    return _node(a.value / b.value, (a, b), vjp, "div")


def neg(a):
    a = as_tensor(a)
    return _node(-a.value, (a,), lambda g: (neg(g),), "neg")


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    def vjp(g):
        ga = matmul(g, transpose(b)) if a.requires_grad else None
        gb = matmul(transpose(a), g) if b.requires_grad else None
        return ga, gb

    return _node(a.value @ b.value, (a, b), vjp, "matmul")


def linear(x, weight, bias):
    """Fused ``x @ weight + bias`` for a batch ``x`` of shape (N, d_in)."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeMismatch(f"linear {x.shape} @ {weight.shape}")

    def vjp(g):
        gx = matmul(g, transpose(weight)) if x.requires_grad else None
        gw = matmul(transpose(x), g) if weight.requires_grad else None
        gb = tsum(g, axis=0) if bias.requires_grad else None
        return gx, gw, gb

    return _node(x.value @ weight.value + bias.value, (x, weight, bias), vjp, "linear")


# -- elementwise nonlinearities ----------------------------------------------

def exp(a):
    a = as_tensor(a)
    out = _node(np.exp(a.value), (a,), None, "exp")
    out.vjp = lambda g: (mul(g, out),)
    return out


def log(a):
    a = as_tensor(a)
    return _node(np.log(a.value), (a,), lambda g: (div(g, a),), "log")


def _sigmoid_np(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(a):
    a = as_tensor(a)
    out = _node(_sigmoid_np(a.value), (a,), None, "sigmoid")
    out.vjp = lambda g: (mul(g, mul(out, sub(1.0, out))),)
    return out


def tanh(a):
    a = as_tensor(a)
    out = _node(np.tanh(a.value), (a,), None, "tanh")
    out.vjp = lambda g: (mul(g, sub(1.0, mul(out, out))),)
    return out


def relu(a):
    a = as_tensor(a)
    mask = (a.value > 0).astype(np.float64)
    return _node(a.value * mask, (a,), lambda g: (mul(g, mask),), "relu")


def leaky_relu(a, slope=0.01):
    a = as_tensor(a)
    scale = np.where(a.value > 0, 1.0, slope)
    return _node(a.value * scale, (a,), lambda g: (mul(g, scale),), "leaky_relu")


def softplus(a):
    a = as_tensor(a)
    x = a.value
    value = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return _node(value, (a,), lambda g: (mul(g, sigmoid(a)),), "softplus")


def log_sigmoid(a):
    return neg(softplus(neg(a)))


def smooth_elu(a):
    """softplus(2x + 2)/2 - 1."""
    return sub(mul(softplus(add(mul(a, 2.0), 2.0)), 0.5), 1.0)


def tabs(a):
    a = as_tensor(a)
    sign = np.sign(a.value)
    return _node(np.abs(a.value), (a,), lambda g: (mul(g, sign),), "abs")


def square(a):
    a = as_tensor(a)
    return _node(a.value * a.value, (a,), lambda g: (mul(g, mul(a, 2.0)),), "square")


def sqrt(a):
    a = as_tensor(a)
    out = _node(np.sqrt(a.value), (a,), None, "sqrt")
    out.vjp = lambda g: (div(mul(g, 0.5), out),)
    return out


def clamp(a, lo=None, hi=None):
    a = as_tensor(a)
    value = np.clip(a.value, lo, hi)
    mask = np.ones_like(value)
    if lo is not None:
        mask = mask * (a.value >= lo)
    if hi is not None:
        mask = mask * (a.value <= hi)
    return _node(value, (a,), lambda g: (mul(g, mask),), "clamp")


# -- reductions ----------------------------------------------------------------

def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    src = a.shape
    value = a.value.sum(axis=axis, keepdims=keepdims)
    kept = a.value.sum(axis=axis, keepdims=True).shape

    def vjp(g):
        if not keepdims:
            g = reshape(g, kept)
        return (broadcast_to(g, src),)

    return _node(value, (a,), vjp, "sum")


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    count = a.value.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return mul(tsum(a, axis, keepdims), 1.0 / float(count))


def softmax(a, axis=-1):
    a = as_tensor(a)
    shift = a.value.max(axis=axis, keepdims=True)
    e = exp(sub(a, shift))
    return div(e, tsum(e, axis=axis, keepdims=True))


def log_softmax(a, axis=-1):
    a = as_tensor(a)
    shift = a.value.max(axis=axis, keepdims=True)
    z = sub(a, shift)
    return sub(z, log(tsum(exp(z), axis=axis, keepdims=True)))


def norm(a, axis=-1, eps=0.0):
    """Euclidean norm along ``axis``; ``eps`` keeps the derivative finite at 0."""
    return sqrt(add(tsum(square(a), axis=axis), eps))


# -- differentiation -------------------------------------------------------------

def _reachable(output):
    seen = {}
    stack = [output]
    while stack:
        node = stack.pop()
        if node.index in seen:
            continue
        seen[node.index] = node
        for p in node.parents:
            if p.requires_grad:
                if p.index >= node.index:
                    raise CycleDetected(f"parent {p.op}#{p.index} not older than {node.op}#{node.index}")
                stack.append(p)
    return sorted(seen.values(), key=lambda n: n.index, reverse=True)


def grad(output, inputs, create_graph=False, seed=None):
    """Gradients of a scalar ``output`` with respect to each tensor in ``inputs``.

    Inputs that do not influence the output get a zero gradient. With
    ``create_graph`` the returned tensors are themselves differentiable.
    """
    if output.value.size != 1 and seed is None:
        raise NonScalarLoss(f"loss has shape {output.shape}")
    wanted = {x.index for x in inputs}
    adjoint = {output.index: as_tensor(np.ones_like(output.value) if seed is None else seed)}
    results = {}
    ctx = enable_grad() if create_graph else no_grad()
    with ctx:
        if output.requires_grad:
            for node in _reachable(output):
                g = adjoint.pop(node.index, None)
                if g is None:
                    continue
                if node.index in wanted:
                    results[node.index] = g
                if not node.parents:
                    continue
                for parent, pg in zip(node.parents, node.vjp(g)):
                    if pg is None or not parent.requires_grad:
                        continue
                    prev = adjoint.get(parent.index)
                    adjoint[parent.index] = pg if prev is None else add(prev, pg)
        elif output.index in wanted:
            results[output.index] = adjoint[output.index]
    out = []
    for x in inputs:
        g = results.get(x.index)
        out.append(g if g is not None else Tensor(np.zeros_like(x.value)))
    return out


def backward(loss, params):
    """Plain first-order gradients as numpy arrays."""
    return [g.value for g in grad(loss, params)]
