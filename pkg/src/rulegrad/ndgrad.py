"""Small tape-based reverse-mode autodiff over dense float64 arrays.

Every op appends one :class:`Node` to the tape of its operands, so the tape
order is already a topological order and ``backward`` just walks it in
reverse. Shapes must match exactly; the only broadcasting allowed is a
0-d (scalar) operand against a tensor.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import ContractError, NumericError, ShapeError

__all__ = [
    "Tape", "Node", "apply",
    "matmul", "transpose", "cosine", "normalize_rows", "softmax_log_probs", "logsumexp",
    "add", "sub", "mul", "neg", "scale", "sigmoid", "softplus", "log", "exp", "clamp",
    "sum", "mean", "l2_norm_sq", "take", "pick", "logit",
]


class Node:
    """A value on the tape together with the rule to push gradients to its parents."""

    __slots__ = ("tape", "value", "op", "parents", "vjp", "requires_grad", "grad")

    def __init__(self, tape, value, op, parents=(), vjp=None, requires_grad=False):
        value = np.asarray(value, dtype=np.float64)
        value.flags.writeable = False
        self.tape = tape
        self.value = value
        self.op = op
        self.parents = tuple(parents)
        self.vjp = vjp
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(value) if requires_grad else None

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Node(op={self.op!r}, shape={self.shape})"


class Tape:
    """Records nodes in creation order. Not thread-safe; use one tape per thread."""

    def __init__(self):
        self.nodes: list[Node] = []

    def _push(self, node):
        self.nodes.append(node)
        return node

    def leaf(self, value, requires_grad=True) -> Node:
        return self._push(Node(self, np.array(value, dtype=np.float64), "leaf",
                               requires_grad=requires_grad))

    def const(self, value) -> Node:
        return self.leaf(value, requires_grad=False)

    def zero_grad(self):
        for n in self.nodes:
            if n.grad is not None:
                n.grad = np.zeros_like(n.value)

    def backward(self, root: Node):
        """Accumulate d(root)/d(node) into ``node.grad`` for every grad-tracking node."""
        if root.tape is not self:
            raise ContractError("root node belongs to a different tape")
        if root.value.size != 1 or root.value.ndim != 0:
            raise ContractError(f"backward needs a scalar root, got shape {root.shape}")
        pending = {id(root): np.ones((), dtype=np.float64)}
        for node in reversed(self.nodes):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = node.grad + g
            if node.vjp is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                prev = pending.get(id(parent))
                pending[id(parent)] = pg if prev is None else prev + pg


def backward(root: Node):
    root.tape.backward(root)


def _tape_of(nodes: Sequence[Node]):
    tape = None
    for n in nodes:
        if isinstance(n, Node):
            if tape is None:
                tape = n.tape
            elif n.tape is not tape:
                raise ContractError("operands live on different tapes")
    if tape is None:
        raise ContractError("at least one operand must be a Node")
    return tape


def _as_node(x, tape) -> Node:
    if isinstance(x, Node):
        return x
    return tape.const(x)


def apply(op: str, value, parents: Sequence[Node], vjp: Callable) -> Node:
    """Register a new op result. ``vjp(g)`` returns one gradient (or None) per parent."""
    tape = _tape_of(parents)
    req = any(p.requires_grad for p in parents)
    value = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(value)):
        raise NumericError(f"{op} produced non-finite values")
    return tape._push(Node(tape, value, op, parents, vjp if req else None, requires_grad=req))


def _unbroadcast(g, shape):
    return g if g.shape == shape else np.asarray(g.sum())


def _binary_shapes(op, a, b):
    if a.shape != b.shape and a.value.ndim != 0 and b.value.ndim != 0:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# -- linear algebra ---------------------------------------------------------

def matmul(a: Node, b: Node) -> Node:
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.value, b.value
    return apply("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a: Node) -> Node:
    if a.value.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got {a.shape}")
    return apply("transpose", a.value.T, (a,), lambda g: (g.T,))


def cosine(u: Node, v: Node) -> Node:
    if u.value.ndim != 1 or u.shape != v.shape:
        raise ShapeError(f"cosine: need equal-length vectors, got {u.shape} and {v.shape}")
    uv, vv = u.value, v.value
    nu, nv = np.linalg.norm(uv), np.linalg.norm(vv)
    if nu == 0.0 or nv == 0.0:
        raise NumericError("cosine of a zero vector is undefined")
    c = float(uv @ vv) / (nu * nv)

    def vjp(g):
        gu = (vv / (nu * nv) - c * uv / nu**2) * g
        gv = (uv / (nu * nv) - c * vv / nv**2) * g
        return gu, gv

    return apply("cosine", c, (u, v), vjp)


def normalize_rows(a: Node) -> Node:
    """Scale every row of a matrix to unit L2 norm."""
    if a.value.ndim != 2:
        raise ShapeError(f"normalize_rows expects a matrix, got {a.shape}")
    norms = np.linalg.norm(a.value, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        rows = np.flatnonzero(norms[:, 0] == 0.0).tolist()
        raise NumericError(f"normalize_rows: zero-norm rows {rows}")
    out = a.value / norms

    def vjp(g):
        return ((g - out * np.sum(g * out, axis=1, keepdims=True)) / norms,)

    return apply("normalize_rows", out, (a,), vjp)


# -- softmax family ---------------------------------------------------------

def softmax_log_probs(logits: Node) -> Node:
    """Log-softmax over the last axis (vector or row-wise on a matrix)."""
    if logits.value.ndim not in (1, 2) or logits.shape[-1] < 1:
        raise ShapeError(f"softmax_log_probs: bad shape {logits.shape}")
    out = kernels.log_softmax_rows(logits.value)
    p = np.exp(out)
    return apply("log_softmax", out, (logits,),
                 lambda g: (g - p * g.sum(axis=-1, keepdims=True),))


def logsumexp(a: Node) -> Node:
    """log(sum(exp(a))) over the last axis."""
    if a.value.ndim not in (1, 2) or a.shape[-1] < 1:
        raise ShapeError(f"logsumexp: bad shape {a.shape}")
    m = a.value.max(axis=-1, keepdims=True)
    e = np.exp(a.value - m)
    s = e.sum(axis=-1, keepdims=True)
    out = (m + np.log(s))[..., 0]
    w = e / s
    return apply("logsumexp", out, (a,), lambda g: (w * g[..., None],))


# -- elementwise ------------------------------------------------------------

def add(a, b) -> Node:
    tape = _tape_of((a, b))
    a, b = _as_node(a, tape), _as_node(b, tape)
    _binary_shapes("add", a, b)
    return apply("add", a.value + b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Node:
    tape = _tape_of((a, b))
    a, b = _as_node(a, tape), _as_node(b, tape)
    _binary_shapes("sub", a, b)
    return apply("sub", a.value - b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Node:
    tape = _tape_of((a, b))
    a, b = _as_node(a, tape), _as_node(b, tape)
    _binary_shapes("mul", a, b)
    av, bv = a.value, b.value
    return apply("mul", av * bv, (a, b),
                 lambda g: (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)))


def neg(a: Node) -> Node:
    return apply("neg", -a.value, (a,), lambda g: (-g,))


def scale(a: Node, k: float) -> Node:
    k = float(k)
    return apply("scale", k * a.value, (a,), lambda g: (k * g,))


def sigmoid(a: Node) -> Node:
    x = a.value
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return apply("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a: Node) -> Node:
    x = a.value
    out = kernels.softplus(x)
    # d/dx softplus = sigmoid(x), written to avoid overflow
    sig = np.exp(-kernels.softplus(-x))
    return apply("softplus", out, (a,), lambda g: (g * sig,))


def log(a: Node) -> Node:
    x = a.value
    if np.any(x <= 0.0):
        raise NumericError(f"log of non-positive value (min {x.min()!r})")
    return apply("log", np.log(x), (a,), lambda g: (g / x,))


def exp(a: Node) -> Node:
    out = np.exp(a.value)
    return apply("exp", out, (a,), lambda g: (g * out,))


def clamp(a: Node, lo: float, hi: float) -> Node:
    """Clip to [lo, hi]; the gradient is zero wherever the clip is active."""
    if not lo < hi:
        raise ContractError(f"clamp needs lo < hi, got {lo}, {hi}")
    x = a.value
    inside = (x >= lo) & (x <= hi)
    return apply("clamp", np.clip(x, lo, hi), (a,), lambda g: (g * inside,))


def logit(t: Node) -> Node:
    """log(t / (1 - t)) for t strictly inside (0, 1)."""
    x = t.value
    if np.any(x <= 0.0) or np.any(x >= 1.0):
        raise NumericError("logit needs values strictly inside (0, 1)")
    return apply("logit", np.log(x) - np.log1p(-x), (t,), lambda g: (g / (x * (1.0 - x)),))


# -- reductions and indexing -----------------------------------------------

def sum(a: Node, axis: int | None = None) -> Node:  # noqa: A001
    shape = a.shape
    if axis is None:
        return apply("sum", a.value.sum(), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))
    ax = axis % a.value.ndim
    return apply("sum", a.value.sum(axis=ax), (a,),
                 lambda g: (np.broadcast_to(np.expand_dims(g, ax), shape).copy(),))


def mean(a: Node, axis: int | None = None) -> Node:
    n = a.value.size if axis is None else a.shape[axis]
    if n == 0:
        raise ContractError("mean of an empty tensor")
    return scale(sum(a, axis), 1.0 / n)


def l2_norm_sq(a: Node) -> Node:
    x = a.value
    return apply("l2_norm_sq", np.sum(x * x), (a,), lambda g: (2.0 * g * x,))


def take(a: Node, indices, axis: int = 0) -> Node:
    """Select entries along ``axis`` by integer index (duplicates allowed)."""
    idx = np.asarray(indices, dtype=np.intp)
    ax = axis % a.value.ndim
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[ax]):
        raise ContractError(f"take: index out of range for axis of size {a.shape[ax]}")
    shape = a.shape

    def vjp(g):
        out = np.zeros(shape)
        moved = np.moveaxis(out, ax, 0)
        np.add.at(moved, idx, np.moveaxis(g, ax, 0))
        return (out,)

    return apply("take", np.take(a.value, idx, axis=ax), (a,), vjp)


def pick(a: Node, cols) -> Node:
    """Row-wise gather: ``out[i] = a[i, cols[i]]``."""
    cols = np.asarray(cols, dtype=np.intp)
    if a.value.ndim != 2 or cols.shape != (a.shape[0],):
        raise ShapeError(f"pick: need a matrix and one column per row, got {a.shape}, {cols.shape}")
    if cols.size and (cols.min() < 0 or cols.max() >= a.shape[1]):
        raise ContractError(f"pick: column index out of range [0, {a.shape[1]})")
    rows = np.arange(a.shape[0])
    shape = a.shape

    def vjp(g):
        out = np.zeros(shape)
        out[rows, cols] = g
        return (out,)

    return apply("pick", a.value[rows, cols], (a,), vjp)
