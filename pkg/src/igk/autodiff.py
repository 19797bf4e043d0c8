"""A small dense reverse-mode autodiff engine on 2-D float64 arrays.

Only what the GNN and the consistency loss need: matrix products,
elementwise maps, row/column broadcasting and a few fused reductions.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

NORM_EPS = 1e-12


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "parents", "backward_fn", "op")

    def __init__(self, value, requires_grad: bool = False, parents=(), backward_fn=None, op=""):
        v = np.array(value, dtype=np.float64)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v.reshape(1, -1)
        elif v.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {v.shape}")
        self.value = v
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(v)
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.op = op

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.value[0, 0])

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)

    def detach(self) -> "Tensor":
        return Tensor(self.value.copy())

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op or 'leaf'}, requires_grad={self.requires_grad})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scalar_mul(_lift(other), -1.0))

    def __rsub__(self, other):
        return add(_lift(other), scalar_mul(self, -1.0))

    def __mul__(self, other):
        if np.isscalar(other):
            return scalar_mul(self, float(other))
        return elementwise_mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scalar_mul(self, -1.0)

    @property
    def T(self):
        return transpose(self)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(value, parents: Sequence[Tensor], backward_fn, op) -> Tensor:
    need = any(p.requires_grad for p in parents)
    return Tensor(value, need, parents if need else (), backward_fn if need else None, op)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    for da, db in zip(a.shape, b.shape):
        if da != db and da != 1 and db != 1:
            raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


# -- forward ops ----------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")

    def back(g):
        return g @ b.value.T, a.value.T @ g

    return _make(a.value @ b.value, (a, b), back, "matmul")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.value + b.value, (a, b), back, "add")


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "elementwise_mul")

    def back(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)

    return _make(a.value * b.value, (a, b), back, "mul")


def scalar_mul(a: Tensor, c: float) -> Tensor:
    return _make(a.value * c, (a,), lambda g: (g * c,), "scalar_mul")


def transpose(a: Tensor) -> Tensor:
    return _make(a.value.T, (a,), lambda g: (g.T,), "transpose")


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0
    return _make(a.value * mask, (a,), lambda g: (g * mask,), "relu")


def sigmoid(a: Tensor) -> Tensor:
    s = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def log(a: Tensor) -> Tensor:
    if np.any(a.value <= 0):
        raise ValueError("log of non-positive entry")
    return _make(np.log(a.value), (a,), lambda g: (g / a.value,), "log")


def reduce_sum(a: Tensor) -> Tensor:
    return _make(a.value.sum(), (a,), lambda g: (np.full(a.shape, g[0, 0]),), "reduce_sum")


def reduce_mean(a: Tensor) -> Tensor:
    n = a.value.size
    return _make(a.value.mean(), (a,), lambda g: (np.full(a.shape, g[0, 0] / n),), "reduce_mean")


def row_l2_normalize(a: Tensor, eps: float = NORM_EPS) -> Tensor:
    """Divide every row by ``max(||row||, eps)``."""
    norms = np.sqrt((a.value ** 2).sum(axis=1, keepdims=True))
    clamped = np.maximum(norms, eps)
    out = a.value / clamped
    active = norms > eps

    def back(g):
        # d(x/|x|) = (g - y <g, y>) / |x| where the norm is not clamped
        proj = (g * out).sum(axis=1, keepdims=True)
        return (np.where(active, g - out * proj, g) / clamped,)

    return _make(out, (a,), back, "row_l2_normalize")


def segment_mean(a: Tensor, groups: Sequence[int]) -> Tensor:
    """Average rows sharing a group id; ids must be sorted and start at 0."""
    groups = np.asarray(groups, dtype=np.int64)
    if groups.shape[0] != a.shape[0]:
        raise ShapeError(f"segment_mean: {groups.shape[0]} ids for {a.shape[0]} rows")
    if groups.size and (np.any(np.diff(groups) < 0) or groups[0] < 0):
        raise ValueError("segment ids must be sorted ascending and non-negative")
    k = int(groups[-1]) + 1 if groups.size else 0
    counts = np.bincount(groups, minlength=k).astype(np.float64)
    if np.any(counts == 0):
        raise ValueError("empty segment")
    sums = np.zeros((k, a.shape[1]))
    np.add.at(sums, groups, a.value)
    out = sums / counts[:, None]

    def back(g):
        return ((g / counts[:, None])[groups],)

    return _make(out, (a,), back, "segment_mean")


def softmax_cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under row softmax."""
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    if labels.shape != (n,):
        raise ShapeError(f"softmax_cross_entropy: {labels.shape} labels for {n} rows")
    z = logits.value - logits.value.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsum
    loss = -logp[np.arange(n), labels].mean()

    def back(g):
        p = np.exp(logp)
        p[np.arange(n), labels] -= 1.0
        return (g[0, 0] * p / n,)

    return _make(loss, (logits,), back, "softmax_cross_entropy")


# -- backward -----------------------------------------------------------------

def _topo(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in reversed(node.parents):
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every tensor in the graph."""
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    upstream = {id(loss): np.ones((1, 1))}
    for node in reversed(_topo(loss)):
        g = upstream.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = node.grad + g
        if node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            upstream[key] = upstream[key] + pg if key in upstream else pg


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5,
               kink_skip: bool = True) -> float:
    """Largest relative gap between backward gradients and central differences.

    ``f`` must be deterministic and return a scalar tensor.  Coordinates with
    ``|x_i| < 10 * eps`` are skipped when ``kink_skip`` is set, since relu is
    not differentiable at 0.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    x.requires_grad = True
    x.zero_grad()
    backward(f(x))
    analytic = x.grad.copy()
    worst = 0.0
    flat = x.value.reshape(-1)
    for idx in range(flat.size):
        if kink_skip and abs(flat[idx]) < 10 * eps:
            continue
        orig = flat[idx]
        flat[idx] = orig + eps
        fp = f(x).item()
        flat[idx] = orig - eps
        fm = f(x).item()
        flat[idx] = orig
        num = (fp - fm) / (2 * eps)
        a = analytic.reshape(-1)[idx]
        worst = max(worst, abs(a - num) / max(abs(a), abs(num), 1e-8))
    x.zero_grad()
    return worst
