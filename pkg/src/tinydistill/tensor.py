"""Dense float64 tensors with reverse-mode automatic differentiation.

Every op builds a node that records its parent tensors and a closure that
routes the upstream gradient to them; ``backward()`` replays the closures in
reverse topological order. The op set is deliberately small: exactly the
primitives the three sentence classifiers need, nothing more.

Design constraints enforced here:

* float64 everywhere. Gradient checks against central finite differences
  are part of the test contract and float32 noise would drown them.
* Broadcasting is narrow: elementwise ops accept equal shapes, a scalar
  operand, or a row vector against a 2-D matrix. Anything else raises
  ``ShapeError``. Per-row scaling has its own explicit op (``scale_rows``).
* Any NaN/Inf in an op's output (forward or backward) raises
  ``NumericsError`` naming the op. Nothing propagates silently.
* Tensors are immutable once created; only the optimizer writes into
  parameter ``data`` between steps (``grad_check`` also nudges values, but
  restores them).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Sequence

import numpy as np

from .errors import GradCheckError, MaskError, NumericsError, ShapeError, VocabError

Array = np.ndarray


def _check_finite(arr: Array, op: str) -> None:
    if not np.isfinite(arr).all():
        raise NumericsError(op)


class Tensor:
    """A dense float64 array plus an optional same-shape gradient buffer.

    ``grad`` is allocated lazily, the first time a backward pass reaches the
    tensor; tensors that never participate in training keep ``grad=None``.
    """

    def __init__(self, data, requires_grad: bool = False, op: str = "leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        _check_finite(self.data, op)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None
        self.op = op
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[Array], None] | None = None

    @classmethod
    def _from_op(
        cls,
        data: Array,
        parents: Sequence["Tensor"],
        backward: Callable[[Array], None],
        op: str,
    ) -> "Tensor":
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        _check_finite(out.data, op)
        out.grad = None
        out.op = op
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        else:
            # Dead branch for autodiff: drop references so graphs stay small.
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return self.data.item()

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable ``grad`` buffer.

        The root must be a scalar. Iterative topo sort: LSTM graphs over 128
        time steps are deeper than Python's recursion limit.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar root, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            _check_finite(node.grad, node.op + " (backward)")
            node._backward(node.grad)

    # Operator sugar. Scalars on either side are accepted.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        return add(self, scale(other, -1.0))

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op!r}{flag})"


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t: Tensor, g: Array) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _grad_slot(t: Tensor) -> Array:
    """Gradient buffer for in-place slice accumulation."""
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    return t.grad


def _broadcast_ok(a: Array, b: Array) -> bool:
    if a.shape == b.shape:
        return True
    if a.size == 1 or b.size == 1:
        return True
    for vec, mat in ((a, b), (b, a)):
        if mat.ndim == 2 and vec.shape in ((mat.shape[1],), (1, mat.shape[1])):
            return True
    return False


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum the upstream gradient back down to an operand's original shape."""
    if g.shape == shape:
        return g
    if int(np.prod(shape)) == 1:
        return np.sum(g).reshape(shape)
    return np.sum(g, axis=0).reshape(shape)


# ---------------------------------------------------------------------------
# elementwise ops
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if not _broadcast_ok(a.data, b.data):
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    data = a.data + b.data

    def backward(g: Array) -> None:
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return Tensor._from_op(data, (a, b), backward, "add")


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if not _broadcast_ok(a.data, b.data):
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    data = a.data * b.data

    def backward(g: Array) -> None:
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return Tensor._from_op(data, (a, b), backward, "mul")


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a python float; cheaper than building a constant Tensor."""
    data = x.data * c

    def backward(g: Array) -> None:
        _accum(x, g * c)

    return Tensor._from_op(data, (x,), backward, "scale")


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)

    def backward(g: Array) -> None:
        _accum(x, g * (1.0 - t * t))

    return Tensor._from_op(t, (x,), backward, "tanh")


def sigmoid(x: Tensor) -> Tensor:
    # Two-branch form: never exponentiates a positive argument, so no
    # transient overflow for large |x|.
    d = x.data
    s = np.empty_like(d)
    pos = d >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    s[~pos] = e / (1.0 + e)

    def backward(g: Array) -> None:
        _accum(x, g * s * (1.0 - s))

    return Tensor._from_op(s, (x,), backward, "sigmoid")


def relu(x: Tensor) -> Tensor:
    data = np.maximum(x.data, 0.0)

    def backward(g: Array) -> None:
        _accum(x, g * (x.data > 0.0))

    return Tensor._from_op(data, (x,), backward, "relu")


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g: Array) -> None:
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return Tensor._from_op(data, (a, b), backward, "matmul")


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map y = x @ w.T + b with w stored [out x in], b [out]."""
    if x.ndim != 2 or w.ndim != 2 or b.ndim != 1:
        raise ShapeError(f"linear: bad ranks x={x.shape} w={w.shape} b={b.shape}")
    if x.shape[1] != w.shape[1] or w.shape[0] != b.shape[0]:
        raise ShapeError(f"linear: x={x.shape} w={w.shape} b={b.shape}")
    data = x.data @ w.data.T + b.data

    def backward(g: Array) -> None:
        _accum(x, g @ w.data)
        _accum(w, g.T @ x.data)
        _accum(b, g.sum(axis=0))

    return Tensor._from_op(data, (x, w, b), backward, "linear")


# ---------------------------------------------------------------------------
# softmax
# ---------------------------------------------------------------------------


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax with max-subtraction; rows sum to 1, shift-invariant."""
    if x.ndim != 2 or x.shape[1] < 1:
        raise ShapeError(f"softmax_rows needs a non-empty 2-D input, got {x.shape}")
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)

    def backward(g: Array) -> None:
        dot = (g * s).sum(axis=1, keepdims=True)
        _accum(x, s * (g - dot))

    return Tensor._from_op(s, (x,), backward, "softmax_rows")


def masked_softmax_rows(scores: Tensor, mask: Array) -> Tensor:
    """Softmax over the True positions of each row; masked positions get 0.

    Equivalent to sending masked scores to -inf before a plain softmax, but
    no non-finite value is ever materialised in a tensor.
    """
    mask = np.asarray(mask, dtype=bool)
    if scores.ndim != 2 or mask.shape != scores.shape:
        raise ShapeError(f"masked_softmax_rows: scores {scores.shape} vs mask {mask.shape}")
    if not mask.any(axis=1).all():
        raise MaskError("masked_softmax_rows: a row has no real tokens")
    lo = np.where(mask, scores.data, -np.inf)
    z = lo - lo.max(axis=1, keepdims=True)
    e = np.exp(z)  # exp(-inf) underflows cleanly to 0
    w = e / e.sum(axis=1, keepdims=True)

    def backward(g: Array) -> None:
        dot = (g * w).sum(axis=1, keepdims=True)
        _accum(scores, w * (g - dot))

    return Tensor._from_op(w, (scores,), backward, "masked_softmax_rows")


# ---------------------------------------------------------------------------
# shape surgery
# ---------------------------------------------------------------------------


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_coerce(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of zero tensors")
    ndim = tensors[0].ndim
    for t in tensors[1:]:
        if t.ndim != ndim:
            raise ShapeError("concat: mixed ranks")
        for ax in range(ndim):
            if ax != axis % ndim and t.shape[ax] != tensors[0].shape[ax]:
                raise ShapeError(
                    f"concat: non-axis dims differ, {t.shape} vs {tensors[0].shape}"
                )
    data = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def backward(g: Array) -> None:
        for t, part in zip(tensors, np.split(g, offsets, axis=axis)):
            _accum(t, part)

    return Tensor._from_op(data, tuple(tensors), backward, "concat")


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    data = x.data.reshape(shape)

    def backward(g: Array) -> None:
        _accum(x, g.reshape(x.data.shape))

    return Tensor._from_op(data, (x,), backward, "reshape")


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"slice_cols needs 2-D, got {x.shape}")
    data = x.data[:, start:stop].copy()

    def backward(g: Array) -> None:
        if x.requires_grad:
            _grad_slot(x)[:, start:stop] += g

    return Tensor._from_op(data, (x,), backward, "slice_cols")


def time_slice(x: Tensor, t: int) -> Tensor:
    """x[:, t, :] of a (B, T, D) tensor -> (B, D)."""
    if x.ndim != 3:
        raise ShapeError(f"time_slice needs 3-D, got {x.shape}")
    data = x.data[:, t, :].copy()

    def backward(g: Array) -> None:
        if x.requires_grad:
            _grad_slot(x)[:, t, :] += g

    return Tensor._from_op(data, (x,), backward, "time_slice")


def time_window(x: Tensor, start: int, length: int) -> Tensor:
    """x[:, start:start+length, :] of a (B, T, D) tensor."""
    if x.ndim != 3:
        raise ShapeError(f"time_window needs 3-D, got {x.shape}")
    if start < 0 or start + length > x.shape[1]:
        raise ShapeError(f"time_window [{start}:{start + length}] out of T={x.shape[1]}")
    data = x.data[:, start : start + length, :].copy()

    def backward(g: Array) -> None:
        if x.requires_grad:
            _grad_slot(x)[:, start : start + length, :] += g

    return Tensor._from_op(data, (x,), backward, "time_window")


def stack_time(steps: Sequence[Tensor]) -> Tensor:
    """Stack T tensors of shape (B, D) into (B, T, D)."""
    steps = list(steps)
    if not steps:
        raise ShapeError("stack_time of zero steps")
    for s in steps:
        if s.shape != steps[0].shape or s.ndim != 2:
            raise ShapeError("stack_time: steps must share one 2-D shape")
    data = np.stack([s.data for s in steps], axis=1)

    def backward(g: Array) -> None:
        for i, s in enumerate(steps):
            _accum(s, g[:, i, :])

    return Tensor._from_op(data, tuple(steps), backward, "stack_time")


# ---------------------------------------------------------------------------
# model-specific primitives
# ---------------------------------------------------------------------------


def embedding_lookup(table: Tensor, ids: Array, pad_id: int = 0) -> Tensor:
    """Row lookup table[ids]; gradients never flow into the PAD row."""
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise VocabError("token ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise VocabError(
            f"token id out of range [0, {table.shape[0]}): min={ids.min()}, max={ids.max()}"
        )
    data = table.data[ids]

    def backward(g: Array) -> None:
        if not table.requires_grad:
            return
        buf = _grad_slot(table)
        keep = ids != pad_id
        np.add.at(buf, ids[keep], g[keep])

    return Tensor._from_op(data, (table,), backward, "embedding_lookup")


def weighted_time_sum(seq: Tensor, weights: Tensor) -> Tensor:
    """sum_t weights[b,t] * seq[b,t,:] -> (B, H)."""
    if seq.ndim != 3 or weights.ndim != 2 or seq.shape[:2] != weights.shape:
        raise ShapeError(f"weighted_time_sum: seq {seq.shape} vs weights {weights.shape}")
    data = np.einsum("bt,bth->bh", weights.data, seq.data)

    def backward(g: Array) -> None:
        _accum(seq, weights.data[:, :, None] * g[:, None, :])
        _accum(weights, np.einsum("bh,bth->bt", g, seq.data))

    return Tensor._from_op(data, (seq, weights), backward, "weighted_time_sum")


def masked_max_over_time(x: Tensor, valid: Array) -> Tensor:
    """Row-wise max over the True positions of ``valid`` -> (B, 1).

    The gradient routes to the first maximal valid position of each row.
    """
    valid = np.asarray(valid, dtype=bool)
    if x.ndim != 2 or valid.shape != x.shape:
        raise ShapeError(f"masked_max_over_time: x {x.shape} vs valid {valid.shape}")
    if not valid.any(axis=1).all():
        raise MaskError("masked_max_over_time: a row has no valid position")
    lo = np.where(valid, x.data, -np.inf)
    idx = lo.argmax(axis=1)
    rows = np.arange(x.shape[0])
    data = lo[rows, idx].reshape(-1, 1)

    def backward(g: Array) -> None:
        if x.requires_grad:
            _grad_slot(x)[rows, idx] += g[:, 0]

    return Tensor._from_op(data, (x,), backward, "masked_max_over_time")


def scale_rows(x: Tensor, s: Array) -> Tensor:
    """Multiply each row of x (m, n) by the constant column s (m, 1)."""
    s = np.asarray(s, dtype=np.float64)
    if x.ndim != 2 or s.shape != (x.shape[0], 1):
        raise ShapeError(f"scale_rows: x {x.shape} vs s {s.shape}")
    data = x.data * s

    def backward(g: Array) -> None:
        _accum(x, g * s)

    return Tensor._from_op(data, (x,), backward, "scale_rows")


def dropout(x: Tensor, rate: float, mode: str, rng=None) -> Tensor:
    """Inverted dropout: train mode rescales kept units by 1/(1-rate);
    eval mode (and rate 0) is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ValueError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an Rng")
    keep = (rng.random(x.shape) >= rate).astype(np.float64) / (1.0 - rate)

    def backward(g: Array) -> None:
        _accum(x, g * keep)

    return Tensor._from_op(x.data * keep, (x,), backward, "dropout")


def sum_all(x: Tensor) -> Tensor:
    data = np.asarray(x.data.sum())

    def backward(g: Array) -> None:
        _accum(x, np.full(x.data.shape, float(g)))

    return Tensor._from_op(data, (x,), backward, "sum_all")


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    eps: float
    tol: float
    per_param: Dict[str, float]
    max_rel_err: float
    passed: bool


def grad_check(
    f: Callable[[], Tensor],
    params: Dict[str, Tensor],
    eps: float = 1e-5,
    tol: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients of the scalar ``f()`` with central finite
    differences, coordinate by coordinate.

    ``f`` must be deterministic (it is re-evaluated twice per parameter
    entry) and must read the parameter tensors passed here by reference.
    Relative error per entry is |a - n| / max(1, |a|, |n|); a parameter's
    score is its worst entry.
    """
    if not (1e-6 <= eps <= 1e-4):
        raise ValueError(f"eps must be within [1e-6, 1e-4], got {eps}")
    for p in params.values():
        p.grad = None
    out = f()
    if not isinstance(out, Tensor) or out.size != 1:
        raise ValueError("grad_check: f must return a scalar Tensor")
    out.backward()
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

    def eval_scalar() -> float:
        v = f().data.item()
        if not math.isfinite(v):
            raise GradCheckError("f produced a non-finite value during perturbation")
        return v

    per_param: Dict[str, float] = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        aflat = analytic[name].reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = eval_scalar()
            flat[i] = orig - eps
            f_minus = eval_scalar()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            rel = abs(aflat[i] - numeric) / max(1.0, abs(aflat[i]), abs(numeric))
            if rel > worst:
                worst = rel
        per_param[name] = worst
    max_rel = max(per_param.values(), default=0.0)
    return GradCheckReport(
        eps=eps, tol=tol, per_param=per_param, max_rel_err=max_rel, passed=max_rel <= tol
    )
