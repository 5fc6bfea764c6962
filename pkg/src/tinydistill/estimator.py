"""scikit-learn style front door.

``SentenceClassifier`` wraps the training harness behind the familiar
fit/predict/score surface so the models drop into pipelines, grid search and
cross-validation. X is a sequence of raw sentences; y is 0/1. Passing
``teacher_logits`` to ``fit`` switches on distillation against those
constants.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import data as D
from .harness import RunReport, TrainConfig, run_training
from .tensor import Tensor, softmax_rows


def check_sentences(X) -> list:
    """Validate a 1-D collection of strings, returned as a list."""
    if isinstance(X, str):
        raise ValueError("X must be a sequence of sentences, not a single string")
    X = list(X)
    for i, s in enumerate(X):
        if not isinstance(s, str):
            raise ValueError(f"X[{i}] is {type(s).__name__}, expected str")
    if not X:
        raise ValueError("X is empty")
    return X


def check_binary_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("y must contain only 0 and 1")
    return y.astype(np.int64)


def check_teacher_logits(t, n: int) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.shape != (n, 2):
        raise ValueError(f"teacher_logits has shape {t.shape}, expected ({n}, 2)")
    if not np.isfinite(t).all():
        raise ValueError("teacher_logits must be finite")
    return t


class SentenceClassifier(BaseEstimator, ClassifierMixin):
    """Binary sentence classifier trained from scratch on the given corpus.

    Parameters mirror the training recipe: architecture, seed, epochs 20,
    batch size 32, Adam with step-decayed learning rate, and the
    distillation mixing weight alpha (only used when ``fit`` receives
    teacher logits).

    Examples
    --------
    >>> clf = SentenceClassifier(arch="cnn", epochs=5, seed=0)
    >>> clf.fit(["good movie", "bad movie"], [1, 0])  # doctest: +ELLIPSIS
    SentenceClassifier(...)
    >>> int(clf.predict(["good movie"])[0]) in (0, 1)
    True
    """

    def __init__(
        self,
        arch: str = "bilstm_attn",
        seed: int = 0,
        epochs: int = 20,
        batch_size: int = 32,
        lr: float = 1e-3,
        gamma: float = 0.9,
        steplr_step_size: int = 1,
        alpha: float = 0.5,
        embed_dim: int = 64,
        hidden_dim: int = 64,
        max_len: int = 128,
        min_freq: int = 1,
    ):
        self.arch = arch
        self.seed = seed
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.gamma = gamma
        self.steplr_step_size = steplr_step_size
        self.alpha = alpha
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.max_len = max_len
        self.min_freq = min_freq

    def fit(
        self,
        X,
        y,
        dev: Optional[Tuple[Sequence[str], Sequence[int]]] = None,
        teacher_logits=None,
    ) -> "SentenceClassifier":
        """Train on raw sentences.

        ``dev=(X_dev, y_dev)`` enables per-epoch model selection by dev
        accuracy; without it the final epoch's weights are kept.
        ``teacher_logits`` (n, 2) flips the objective to distillation with
        ``self.alpha``.
        """
        X = check_sentences(X)
        y = check_binary_labels(y, len(X))
        records = list(zip(X, (int(v) for v in y)))
        vocab = D.build_vocab(records, min_freq=self.min_freq)
        examples = D.encode_examples(records, vocab, max_len=self.max_len)

        mode = "baseline"
        if teacher_logits is not None:
            teacher_logits = check_teacher_logits(teacher_logits, len(X))
            examples = [
                D.TokenizedExample(
                    ex.example_id, ex.token_ids, ex.label, tuple(teacher_logits[i])
                )
                for i, ex in enumerate(examples)
            ]
            mode = "distill"

        dev_examples = None
        if dev is not None:
            X_dev = check_sentences(dev[0])
            y_dev = check_binary_labels(dev[1], len(X_dev))
            dev_examples = D.encode_examples(
                list(zip(X_dev, (int(v) for v in y_dev))), vocab, max_len=self.max_len
            )

        cfg = TrainConfig(
            arch=self.arch,
            seed=self.seed,
            epochs=self.epochs,
            batch_size=self.batch_size,
            alpha=self.alpha,
            lr=self.lr,
            steplr_step_size=self.steplr_step_size,
            gamma=self.gamma,
            mode=mode,
            logits_path="<in-memory>" if mode == "distill" else None,
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            max_len=self.max_len,
            min_freq=self.min_freq,
        )
        checkpoint, report = run_training(cfg, examples, dev_examples, None, vocab)
        self.vocab_ = vocab
        self.model_ = checkpoint.build_model()
        self.checkpoint_ = checkpoint
        self.report_: RunReport = report
        self.classes_ = np.array([0, 1])
        return self

    def _logits(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise RuntimeError("this SentenceClassifier is not fitted yet")
        X = check_sentences(X)
        records = [(s, 0) for s in X]  # labels unused at inference
        examples = D.encode_examples(records, self.vocab_, max_len=self.max_len)
        batches = D.make_batches(
            examples, self.batch_size, pad_floor=self.model_.cfg.pad_floor
        )
        chunks = [
            self.model_.forward(b.ids, b.mask, mode="eval").data for b in batches
        ]
        return np.concatenate(chunks, axis=0)

    def predict(self, X) -> np.ndarray:
        logits = self._logits(X)
        return np.where(logits[:, 1] > logits[:, 0], 1, 0)

    def predict_proba(self, X) -> np.ndarray:
        return softmax_rows(Tensor(self._logits(X))).data
