"""Losses for both training modes, plus the Adam optimizer and step decay.

The distillation objective is a convex combination: ``alpha`` weights the
usual cross-entropy against gold labels, ``1 - alpha`` weights the mean
squared error between student and (constant) teacher logits. ``alpha = 1``
reduces bitwise to the baseline loss, which training relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from .errors import NumericsError, ShapeError
from .tensor import Tensor


@dataclass
class DistillWeights:
    """Mixing coefficient between cross-entropy (alpha) and MSE (1-alpha)."""

    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean over the batch of -log softmax(logits)[label].

    Computed through log-sum-exp with max subtraction, so huge logits never
    reach an explicit exp. For two classes this equals binary log-loss on
    the positive-class softmax probability.
    """
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects (B, C) logits, got {logits.shape}")
    batch, classes = logits.shape
    if labels.shape != (batch,):
        raise ShapeError(f"labels shape {labels.shape} does not match batch {batch}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ValueError(f"labels must lie in [0, {classes}), got {sorted(set(labels.tolist()))}")
    x = logits.data
    m = x.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(x - m).sum(axis=1))
    rows = np.arange(batch)
    data = np.asarray((lse - x[rows, labels]).mean())

    def backward(g: np.ndarray) -> None:
        if not logits.requires_grad:
            return
        soft = np.exp(x - m)
        soft /= soft.sum(axis=1, keepdims=True)
        soft[rows, labels] -= 1.0
        if logits.grad is None:
            logits.grad = np.zeros_like(logits.data)
        logits.grad += (float(g) / batch) * soft

    return Tensor._from_op(data, (logits,), backward, "cross_entropy")


def mse_logits(student: Tensor, teacher: Tensor | np.ndarray) -> Tensor:
    """Mean squared error over every logit entry: sum((y - y~)^2) / (B*C)."""
    teacher = teacher if isinstance(teacher, Tensor) else Tensor(teacher)
    if student.shape != teacher.shape:
        raise ShapeError(f"mse_logits: shapes differ, {student.shape} vs {teacher.shape}")
    diff = student.data - teacher.data
    n = student.size
    data = np.asarray((diff * diff).sum() / n)

    def backward(g: np.ndarray) -> None:
        coef = 2.0 * float(g) / n
        if student.requires_grad:
            if student.grad is None:
                student.grad = np.zeros_like(student.data)
            student.grad += coef * diff
        if teacher.requires_grad:
            if teacher.grad is None:
                teacher.grad = np.zeros_like(teacher.data)
            teacher.grad -= coef * diff

    return Tensor._from_op(data, (student, teacher), backward, "mse_logits")


def distill_loss(
    logits: Tensor,
    labels: np.ndarray,
    teacher_logits: np.ndarray,
    w: DistillWeights,
) -> Tensor:
    """alpha * cross_entropy + (1 - alpha) * mse against constant teacher logits."""
    teacher = Tensor(np.asarray(teacher_logits, dtype=np.float64))  # constants: no grad
    if teacher.shape != logits.shape:
        raise ShapeError(
            f"teacher logits shape {teacher.shape} does not match student {logits.shape}"
        )
    ce = cross_entropy(logits, labels)
    mse = mse_logits(logits, teacher)
    return ce * w.alpha + mse * (1.0 - w.alpha)


# ---------------------------------------------------------------------------
# optimizer and schedule
# ---------------------------------------------------------------------------


class AdamState:
    """Per-parameter moment buffers plus the shared step counter.

    Buffers are keyed by parameter name and zero-initialized; the counter
    increases by one per ``adam_step`` call.
    """

    def __init__(
        self,
        params: Dict[str, Tensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}


def adam_step(params: Dict[str, Tensor], state: AdamState) -> None:
    """One Adam update with bias correction, in place.

    Missing gradients count as zero. Any non-finite gradient aborts before
    a single parameter is touched.
    """
    for name, p in params.items():
        if p.grad is not None and not np.isfinite(p.grad).all():
            raise NumericsError("adam_step", f"non-finite gradient for {name}")
    state.step_count += 1
    t = state.step_count
    bias1 = 1.0 - state.beta1**t
    bias2 = 1.0 - state.beta2**t
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def zero_grads(params: Dict[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None


@dataclass
class StepLrState:
    """lr(epoch) = base_lr * gamma ** floor(epoch / step_size)."""

    base_lr: float
    gamma: float = 0.9
    step_size: int = 1

    def __post_init__(self):
        if self.step_size < 1:
            raise ValueError("step_size must be >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")


def steplr_update(state: StepLrState, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return state.base_lr * state.gamma ** (epoch // state.step_size)
