"""Minimal dense-tensor core with reverse-mode differentiation.

Everything is 64-bit. The tape is rebuilt on every evaluation: each op
returns a new :class:`Tensor` holding its value, its parents, and a
closure that maps the upstream gradient to per-parent gradients.
``backward()`` walks the graph in reverse topological order and
accumulates gradients into leaf ``grad`` buffers.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ShapeError

# Every op output is checked for NaN/Inf; disable only for profiling.
CHECK_FINITE = True


class Tensor:
    """A dense float64 array plus optional tape bookkeeping."""

    __slots__ = ("data", "grad", "_parents", "_bwd")

    def __init__(self, data, parents: tuple = (), bwd: Callable | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        if CHECK_FINITE and not np.all(np.isfinite(self.data)):
            raise FloatingPointError("non-finite entries in tensor")
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._bwd = bwd

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``."""
        if self.data.shape != ():
            raise ValueError("backward() requires a scalar output")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.ones(())}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._bwd is None:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
                continue
            for parent, pg in zip(node._parents, node._bwd(g)):
                if pg is None:
                    continue
                acc = grads.get(id(parent))
                grads[id(parent)] = pg if acc is None else acc + pg

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


def _require(cond: bool, msg: str):
    if not cond:
        raise ShapeError(msg)


def constant(data) -> Tensor:
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} vs {b.shape}") from None
    return Tensor(out, (a, b),
                  lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: incompatible shapes {a.shape} vs {b.shape}") from None
    return Tensor(out, (a, b),
                  lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a.shape} vs {b.shape}") from None
    return Tensor(out, (a, b),
                  lambda g: (_unbroadcast(g * b.data, a.data.shape),
                             _unbroadcast(g * a.data, b.data.shape)))


def scale(a: Tensor, c: float) -> Tensor:
    return Tensor(a.data * c, (a,), lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; supports (m,k)@(k,n) and (m,k)@(k,)."""
    if a.data.ndim != 2 or b.data.ndim not in (1, 2):
        raise ShapeError(f"matmul: unsupported ranks {a.shape} @ {b.shape}")
    _require(a.data.shape[1] == b.data.shape[0],
             f"matmul: inner dims differ {a.shape} @ {b.shape}")
    out = a.data @ b.data

    if b.data.ndim == 1:
        bwd = lambda g: (np.outer(g, b.data), a.data.T @ g)
    else:
        bwd = lambda g: (g @ b.data.T, a.data.T @ g)
    return Tensor(out, (a, b), bwd)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeError("concat: empty input")
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(out, tuple(parts), bwd)


def slice_(a: Tensor, key) -> Tensor:
    out = a.data[key]

    def bwd(g):
        full = np.zeros_like(a.data)
        full[key] = g
        return (full,)

    return Tensor(out, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return Tensor(a.data * mask, (a,), lambda g: (g * mask,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return Tensor(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-a.data))
    return Tensor(out, (a,), lambda g: (g * out * (1.0 - out),))


def rows(table: Tensor, ids) -> Tensor:
    """Embedding lookup: rows of a (V, E) table by integer index/indices."""
    ids = np.asarray(ids)
    if np.any(ids < 0) or np.any(ids >= table.data.shape[0]):
        raise IndexError(f"row index out of range for table {table.shape}")
    out = table.data[ids]

    def bwd(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)

    return Tensor(out, (table,), bwd)


def sum_(a: Tensor) -> Tensor:
    return Tensor(a.data.sum(), (a,), lambda g: (np.broadcast_to(g, a.data.shape).copy(),))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stabilized log-softmax of a 1-D array (plain numpy)."""
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def softmax_cross_entropy(logits: Tensor, target_id: int) -> Tensor:
    """-log softmax(logits)[target]; max-subtraction stabilized."""
    v = logits.data.shape[0]
    if logits.data.ndim != 1 or v < 2:
        raise ShapeError(f"softmax_cross_entropy: need 1-D logits of dim >= 2, got {logits.shape}")
    if not 0 <= target_id < v:
        raise IndexError(f"target id {target_id} outside vocabulary of size {v}")
    logp = log_softmax(logits.data)
    probs = np.exp(logp)

    def bwd(g):
        grad = probs.copy()
        grad[target_id] -= 1.0
        return (g * grad,)

    return Tensor(-logp[target_id], (logits,), bwd)


def mse(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over all entries of the squared difference."""
    _require(pred.data.shape == target.data.shape,
             f"mse: shapes differ {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    n = diff.size

    def bwd(g):
        return (g * 2.0 * diff / n, g * -2.0 * diff / n)

    return Tensor((diff * diff).mean(), (pred, target), bwd)


def add_n(terms: Sequence[Tensor]) -> Tensor:
    """Sum of same-shaped tensors (used to accumulate scalar losses)."""
    out = terms[0].data.copy()
    for t in terms[1:]:
        out = out + t.data
    return Tensor(out, tuple(terms), lambda g: tuple(g for _ in terms))


def grad_check(computation: Callable[[], Tensor], params: dict[str, Tensor],
               eps: float = 1e-6) -> float:
    """Worst relative error between tape gradients and central differences.

    ``computation`` must return a scalar Tensor built from the given leaf
    parameters. Relative error for one entry is |a-b| / max(1, |a|, |b|),
    i.e. absolute for small gradients.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    for p in params.values():
        p.zero_grad()
    out = computation()
    if out.data.shape != ():
        raise ValueError("grad_check requires a scalar computation")
    out.backward()
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in params.items()}

    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = computation().data.item()
            flat[i] = orig - eps
            lo = computation().data.item()
            flat[i] = orig
            fd = (hi - lo) / (2.0 * eps)
            a = analytic[name].reshape(-1)[i]
            rel = abs(a - fd) / max(1.0, abs(a), abs(fd))
            worst = max(worst, rel)
    return worst
