"""
Reverse-mode automatic differentiation over dense numpy arrays.

Only the operations the encoder and the contrastive objective need are
provided. Every op records its inputs and a closure computing the adjoint
of each input; ``backward`` walks the recorded graph in reverse topological
order and accumulates gradients additively, so a tensor consumed by several
ops receives the sum of their adjoints.
"""
from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ContractError, ShapeError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """Array value plus the graph record that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "op", "parents", "_backward", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        dtype=np.float64,
        name: str | None = None,
    ):
        self.data = np.array(data, dtype=dtype)
        if self.data.ndim > 0 and min(self.data.shape) < 1:
            raise ShapeError(f"tensor extents must be >= 1, got {self.data.shape}")
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.op = "leaf"
        self.parents: tuple[Tensor, ...] = ()
        self._backward: Optional[BackwardFn] = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, shape is {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape})"


def _node(data: np.ndarray, op: str, parents: Iterable[Tensor], backward: BackwardFn) -> Tensor:
    parents = tuple(parents)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.requires_grad = any(p.requires_grad for p in parents)
    out.op = op
    # Record the graph only when someone upstream needs gradients
    out.parents = parents if out.requires_grad else ()
    out._backward = backward if out.requires_grad else None
    return out


class Graph:
    """Nodes reachable from an output, in topological order (inputs first)."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, output: Tensor) -> "Graph":
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node.parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)

    def parameters(self) -> list[Tensor]:
        return [n for n in self.nodes if n.op == "leaf" and n.requires_grad]


def backward(loss: Tensor) -> Graph:
    """Populate ``.grad`` on every tensor upstream of a scalar ``loss``."""
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    graph = Graph.from_output(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(graph.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.op == "leaf":
            node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node.parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
    return graph


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise ShapeError(message)


# ---------------------------------------------------------------- ops


def conv1d(x: Tensor, w: Tensor, padding: str = "same") -> Tensor:
    """Stride-1 cross-correlation; x is N x C_in x L, w is C_out x C_in x K."""
    _check(x.data.ndim == 3 and w.data.ndim == 3, f"conv1d expects 3-D input and kernel, got {x.shape} and {w.shape}")
    N, C_in, L = x.shape
    C_out, C_w, K = w.shape
    _check(C_in == C_w, f"conv1d channel mismatch: input has {C_in}, kernel expects {C_w}")
    if padding == "same":
        left = (K - 1) // 2
        right = K - 1 - left
    elif padding == "valid":
        _check(L >= K, f"conv1d valid padding needs L >= K, got L={L} K={K}")
        left = right = 0
    else:
        raise ShapeError(f"unknown padding {padding!r}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (left, right))) if left or right else x.data
    L_out = xp.shape[2] - K + 1
    # N x C_in x L_out x K -> (N*L_out) x (C_in*K)
    cols = sliding_window_view(xp, K, axis=2).transpose(0, 2, 1, 3).reshape(N * L_out, C_in * K)
    w2 = w.data.reshape(C_out, C_in * K)
    out = (cols @ w2.T).reshape(N, L_out, C_out).transpose(0, 2, 1)

    def _backward(g: np.ndarray):
        g2 = g.transpose(0, 2, 1).reshape(N * L_out, C_out)
        gw = (g2.T @ cols).reshape(C_out, C_in, K)
        gcols = (g2 @ w2).reshape(N, L_out, C_in, K)
        gxp = np.zeros_like(xp)
        for k in range(K):
            gxp[:, :, k:k + L_out] += gcols[:, :, :, k].transpose(0, 2, 1)
        gx = gxp[:, :, left:left + L] if left or right else gxp
        return gx, gw

    return _node(np.ascontiguousarray(out), "conv1d", (x, w), _backward)


def bias_add(x: Tensor, b: Tensor) -> Tensor:
    """Add a per-channel bias along axis 1 (axis 0 for a 1-D input)."""
    _check(b.data.ndim == 1, f"bias must be 1-D, got {b.shape}")
    axis = 1 if x.data.ndim > 1 else 0
    _check(x.shape[axis] == b.shape[0], f"bias length {b.shape[0]} does not match axis extent {x.shape[axis]}")
    shape = [1] * x.data.ndim
    shape[axis] = b.shape[0]
    reduce_axes = tuple(a for a in range(x.data.ndim) if a != axis)

    def _backward(g: np.ndarray):
        return g, g.sum(axis=reduce_axes) if reduce_axes else g

    return _node(x.data + b.data.reshape(shape), "bias_add", (x, b), _backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0  # subgradient 0 at 0

    def _backward(g: np.ndarray):
        return (g * mask,)

    return _node(np.where(mask, x.data, 0.0).astype(x.data.dtype), "relu", (x,), _backward)


def mean_pool(x: Tensor, axis: int = -1) -> Tensor:
    """Average over one axis (the temporal axis for encoder activations)."""
    axis = axis % x.data.ndim
    n = x.shape[axis]

    def _backward(g: np.ndarray):
        return (np.repeat(np.expand_dims(g, axis), n, axis=axis) / n,)

    return _node(x.data.mean(axis=axis), "mean_pool", (x,), _backward)


def dense(x: Tensor, w: Tensor) -> Tensor:
    """x @ w with x of shape (F_in,) or (N, F_in) and w of shape (F_in, F_out)."""
    _check(w.data.ndim == 2 and x.data.ndim in (1, 2), f"dense expects (N, F_in) @ (F_in, F_out), got {x.shape} @ {w.shape}")
    _check(x.shape[-1] == w.shape[0], f"dense inner extents differ: {x.shape[-1]} vs {w.shape[0]}")

    def _backward(g: np.ndarray):
        if x.data.ndim == 1:
            return g @ w.data.T, np.outer(x.data, g)
        return g @ w.data.T, x.data.T @ g

    return _node(x.data @ w.data, "dense", (x, w), _backward)


def contract(a: Tensor, b: Tensor, scale: float = 1.0) -> Tensor:
    """Batched feature-axis contraction: (B,k,F),(B,p,F) -> scale * (B,k,p)."""
    _check(a.data.ndim == 3 and b.data.ndim == 3, f"contract expects 3-D inputs, got {a.shape} and {b.shape}")
    _check(a.shape[0] == b.shape[0] and a.shape[2] == b.shape[2], f"contract extents differ: {a.shape} vs {b.shape}")
    out = np.matmul(a.data, b.data.transpose(0, 2, 1)) * scale

    def _backward(g: np.ndarray):
        return np.matmul(g, b.data) * scale, np.matmul(g.transpose(0, 2, 1), a.data) * scale

    return _node(out, "contract", (a, b), _backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {x.shape} to {shape}") from exc
    original = x.shape

    def _backward(g: np.ndarray):
        return (g.reshape(original),)

    return _node(out, "reshape", (x,), _backward)


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(np.argsort(axes))

    def _backward(g: np.ndarray):
        return (g.transpose(inverse),)

    return _node(np.ascontiguousarray(x.data.transpose(axes)), "transpose", (x,), _backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check(a.shape == b.shape, f"add needs equal shapes, got {a.shape} and {b.shape}")

    def _backward(g: np.ndarray):
        return g, g

    return _node(a.data + b.data, "add", (a, b), _backward)


def scale(x: Tensor, c: float) -> Tensor:
    def _backward(g: np.ndarray):
        return (g * c,)

    return _node(x.data * c, "scale", (x,), _backward)


def total(x: Tensor) -> Tensor:
    """Sum of all elements."""
    def _backward(g: np.ndarray):
        return (np.full_like(x.data, g.reshape(-1)[0]),)

    return _node(np.array(x.data.sum(), dtype=x.data.dtype), "sum", (x,), _backward)


def mean(x: Tensor) -> Tensor:
    """Scalar mean of all elements."""
    n = x.data.size

    def _backward(g: np.ndarray):
        return (np.full_like(x.data, g.reshape(-1)[0] / n),)

    return _node(np.array(x.data.mean(), dtype=x.data.dtype), "mean", (x,), _backward)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax with the row max subtracted first."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Fused mean softmax cross-entropy over the rows of an N x C logit matrix."""
    _check(logits.data.ndim == 2, f"softmax_cross_entropy expects N x C logits, got {logits.shape}")
    targets = np.asarray(targets, dtype=np.int64)
    N, C = logits.shape
    _check(targets.shape == (N,), f"expected {N} targets, got shape {targets.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= C):
        raise ShapeError(f"targets must lie in [0, {C})")
    logp = log_softmax(logits.data)
    rows = np.arange(N)
    value = -logp[rows, targets].mean()

    def _backward(g: np.ndarray):
        grad = np.exp(logp)
        grad[rows, targets] -= 1.0
        return (grad * (g.reshape(-1)[0] / N),)

    return _node(np.array(value, dtype=logits.data.dtype), "softmax_ce", (logits,), _backward)


# ---------------------------------------------------------------- verification


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor | np.ndarray, step: float = 1e-6) -> float:
    """Max relative error between the analytic gradient and central differences.

    Relative error is |analytic - numeric| / max(1, |numeric|), maximised over
    coordinates of ``x``.
    """
    base = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    probe = Tensor(base.copy(), requires_grad=True)
    out = f(probe)
    backward(out)
    analytic = probe.grad if probe.grad is not None else np.zeros_like(base)

    worst = 0.0
    flat = base.reshape(-1)
    for i in range(flat.size):
        plus = flat.copy()
        minus = flat.copy()
        plus[i] += step
        minus[i] -= step
        f_plus = f(Tensor(plus.reshape(base.shape))).item()
        f_minus = f(Tensor(minus.reshape(base.shape))).item()
        numeric = (f_plus - f_minus) / (2 * step)
        err = abs(analytic.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
        worst = max(worst, err)
    return worst
