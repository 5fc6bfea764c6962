"""Training and evaluation loops for both modes, plus run artifacts.

A run is fully determined by its TrainConfig: the seed feeds three named
substreams (weight init, epoch shuffling, dropout), so two runs with the
same config produce bitwise-identical weights, losses and reports. The
distillation path differs from the baseline only in the loss term; at
alpha = 1 the two are indistinguishable down to the last bit, and a test
holds us to that.

Model selection: dev accuracy is measured after every epoch in eval mode,
the best epoch wins (earliest on ties), and only that checkpoint is scored
on the test split.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import data as D
from .data import Batch, LogitMap, TokenizedExample, Vocabulary
from .errors import DataError, NumericsError
from .layers import Model, ModelConfig, build_model, count_params
from .objectives import (
    AdamState,
    DistillWeights,
    StepLrState,
    adam_step,
    cross_entropy,
    distill_loss,
    steplr_update,
    zero_grads,
)
from .rng import Rng

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    """Everything needed to reproduce one training run."""

    arch: str
    seed: int = 0
    epochs: int = 20
    batch_size: int = 32
    alpha: float = 0.5
    lr: float = 1e-3
    steplr_step_size: int = 1
    gamma: float = 0.9
    mode: str = "baseline"
    data_dir: Optional[str] = None
    logits_path: Optional[str] = None
    out_dir: Optional[str] = None
    # architecture knobs (paper-recipe defaults)
    embed_dim: int = 64
    hidden_dim: int = 64
    max_len: int = 128
    kernel_widths: Tuple[int, ...] = (3, 4, 5)
    cnn_hidden_dim: int = 64
    dropout_rate: float = 0.5
    min_freq: int = 1

    def __post_init__(self):
        self.kernel_widths = tuple(int(w) for w in self.kernel_widths)
        if self.mode not in ("baseline", "distill"):
            raise ValueError(f"mode must be 'baseline' or 'distill', got {self.mode!r}")
        if self.mode == "distill" and not self.logits_path:
            raise ValueError("distill mode requires a logit cache path")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            arch=self.arch,
            vocab_size=vocab_size,
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            kernel_widths=self.kernel_widths,
            cnn_hidden_dim=self.cnn_hidden_dim,
            dropout_rate=self.dropout_rate,
            max_len=self.max_len,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernel_widths"] = list(self.kernel_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "kernel_widths" in d:
            d["kernel_widths"] = tuple(d["kernel_widths"])
        return cls(**d)


@dataclass
class RunReport:
    arch: str
    mode: str
    alpha: float
    seed: int
    epochs: int
    train_loss_per_epoch: List[float]
    dev_acc_per_epoch: List[float]
    selected_epoch: int
    test_acc: Optional[float]
    param_count: int
    param_ratio: float
    config: dict

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(**d)


def accuracy(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of equal entries; argmax ties upstream resolve to class 0."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError(f"length mismatch: {predictions.shape} vs {labels.shape}")
    if predictions.size == 0:
        raise ValueError("accuracy of zero predictions is undefined")
    return float((predictions == labels).mean())


def predict_batch(model: Model, batch: Batch) -> np.ndarray:
    """Eval-mode class decisions for one batch. Tie logits -> class 0."""
    logits = model.forward(batch.ids, batch.mask, mode="eval").data
    return np.where(logits[:, 1] > logits[:, 0], 1, 0)


def evaluate_batches(model: Model, batches: Sequence[Batch]) -> float:
    preds: List[np.ndarray] = []
    labels: List[np.ndarray] = []
    for batch in batches:
        preds.append(predict_batch(model, batch))
        labels.append(batch.labels)
    return accuracy(np.concatenate(preds), np.concatenate(labels))


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------


@dataclass
class Checkpoint:
    """Self-describing snapshot: config + vocabulary + weights.

    Weight arrays are serialized as base64 of their little-endian float64
    bytes, so a load reproduces evaluation logits bit for bit on any
    platform.
    """

    train_config: TrainConfig
    model_config: ModelConfig
    vocab: Vocabulary
    weights: Dict[str, np.ndarray]
    epoch: int
    dev_accuracy: Optional[float]

    def save(self, path) -> None:
        payload = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "train_config": self.train_config.to_dict(),
            "model_config": self.model_config.to_dict(),
            "vocab": self.vocab.to_dict(),
            "epoch": self.epoch,
            "dev_accuracy": self.dev_accuracy,
            "weights": {
                name: {
                    "shape": list(arr.shape),
                    "dtype": "<f8",
                    "data": base64.b64encode(
                        np.ascontiguousarray(arr, dtype="<f8").tobytes()
                    ).decode("ascii"),
                }
                for name, arr in self.weights.items()
            },
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Checkpoint":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
        version = payload.get("format_version")
        if version != CHECKPOINT_FORMAT_VERSION:
            raise DataError(f"unsupported checkpoint format version {version!r}")
        weights = {}
        for name, spec in payload["weights"].items():
            raw = base64.b64decode(spec["data"])
            arr = np.frombuffer(raw, dtype=spec["dtype"]).astype(np.float64)
            weights[name] = arr.reshape(spec["shape"])
        return cls(
            train_config=TrainConfig.from_dict(payload["train_config"]),
            model_config=ModelConfig.from_dict(payload["model_config"]),
            vocab=Vocabulary.from_dict(payload["vocab"]),
            weights=weights,
            epoch=payload["epoch"],
            dev_accuracy=payload["dev_accuracy"],
        )

    def build_model(self) -> Model:
        # arbitrary seed: every weight is overwritten right after
        model = build_model(self.model_config, Rng(0))
        model.load_params(self.weights)
        return model


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _load_corpus(cfg: TrainConfig) -> Dict[str, List[Tuple[str, int]]]:
    if not cfg.data_dir:
        raise ValueError("config has no data_dir")
    root = Path(cfg.data_dir)
    return {
        split: D.load_split(root / fname, split) for split, fname in D.SPLIT_FILES.items()
    }


def run_training(
    cfg: TrainConfig,
    train_examples: Sequence[TokenizedExample],
    dev_examples: Optional[Sequence[TokenizedExample]],
    test_examples: Optional[Sequence[TokenizedExample]],
    vocab: Vocabulary,
) -> Tuple[Checkpoint, RunReport]:
    """The shared epoch loop. Distill mode expects teacher logits to be
    attached to every training example already; evaluation always uses gold
    labels only.
    """
    if cfg.mode == "distill":
        missing = [ex.example_id for ex in train_examples if ex.teacher_logits is None]
        if missing:
            raise DataError(f"distill mode but example id {missing[0]} has no teacher logits")
    rng = Rng(cfg.seed)
    init_rng = rng.child("init")
    shuffle_rng = rng.child("shuffle")
    dropout_rng = rng.child("dropout")
    model_cfg = cfg.model_config(vocab.size)
    model = build_model(model_cfg, init_rng)
    params = model.params()
    adam = AdamState(params, lr=cfg.lr)
    schedule = StepLrState(base_lr=cfg.lr, gamma=cfg.gamma, step_size=cfg.steplr_step_size)
    weights = DistillWeights(cfg.alpha)

    dev_batches = (
        D.make_batches(dev_examples, cfg.batch_size, pad_floor=model_cfg.pad_floor)
        if dev_examples
        else None
    )
    test_batches = (
        D.make_batches(test_examples, cfg.batch_size, pad_floor=model_cfg.pad_floor)
        if test_examples
        else None
    )

    best_weights = model.export_params()
    best_acc = -1.0
    best_epoch = -1
    train_losses: List[float] = []
    dev_accs: List[float] = []

    for epoch in range(cfg.epochs):
        adam.lr = steplr_update(schedule, epoch)
        batches = D.make_batches(
            train_examples,
            cfg.batch_size,
            shuffle=True,
            rng=shuffle_rng,
            pad_floor=model_cfg.pad_floor,
        )
        loss_sum = 0.0
        seen = 0
        for batch_index, batch in enumerate(batches):
            zero_grads(params)
            try:
                logits = model.forward(batch.ids, batch.mask, mode="train", dropout_rng=dropout_rng)
                if cfg.mode == "distill":
                    loss = distill_loss(logits, batch.labels, batch.teacher_logits, weights)
                else:
                    loss = cross_entropy(logits, batch.labels)
                loss.backward()
                adam_step(params, adam)
            except NumericsError as exc:
                raise NumericsError(exc.op, f"epoch {epoch}, batch {batch_index}") from exc
            loss_sum += loss.item() * batch.size
            seen += batch.size
        train_losses.append(loss_sum / seen)
        if dev_batches is not None:
            dev_acc = evaluate_batches(model, dev_batches)
            dev_accs.append(dev_acc)
            if dev_acc > best_acc:
                best_acc = dev_acc
                best_epoch = epoch
                best_weights = model.export_params()
        else:
            # no dev split: keep the final epoch
            best_epoch = epoch
            best_weights = model.export_params()

    model.load_params(best_weights)
    test_acc = evaluate_batches(model, test_batches) if test_batches is not None else None
    param_count, param_ratio = count_params(model)

    checkpoint = Checkpoint(
        train_config=cfg,
        model_config=model_cfg,
        vocab=vocab,
        weights=best_weights,
        epoch=best_epoch,
        dev_accuracy=best_acc if dev_batches is not None else None,
    )
    report = RunReport(
        arch=cfg.arch,
        mode=cfg.mode,
        alpha=cfg.alpha,
        seed=cfg.seed,
        epochs=cfg.epochs,
        train_loss_per_epoch=train_losses,
        dev_acc_per_epoch=dev_accs,
        selected_epoch=best_epoch,
        test_acc=test_acc,
        param_count=param_count,
        param_ratio=param_ratio,
        config=cfg.to_dict(),
    )
    return checkpoint, report


def _prepare_examples(cfg: TrainConfig):
    corpus = _load_corpus(cfg)
    vocab = D.build_vocab(corpus["train"], min_freq=cfg.min_freq)
    encoded = {
        split: D.encode_examples(records, vocab, max_len=cfg.max_len)
        for split, records in corpus.items()
    }
    return vocab, encoded


def train_baseline(cfg: TrainConfig) -> Tuple[Checkpoint, RunReport]:
    """20-epoch (by default) cross-entropy training straight off the TSVs."""
    if cfg.mode != "baseline":
        raise ValueError("train_baseline needs cfg.mode == 'baseline'")
    vocab, encoded = _prepare_examples(cfg)
    return run_training(cfg, encoded["train"], encoded["dev"], encoded["test"], vocab)


def train_distill(
    cfg: TrainConfig, logit_cache: Optional[LogitMap] = None
) -> Tuple[Checkpoint, RunReport]:
    """Same loop as the baseline but optimizing the mixed objective.

    The cache must cover the training split exactly; any hole fails before
    epoch 0. Dev and test evaluation never look at teacher logits.
    """
    if cfg.mode != "distill":
        raise ValueError("train_distill needs cfg.mode == 'distill'")
    if logit_cache is None:
        logit_cache = D.logits_load(cfg.logits_path)
    vocab, encoded = _prepare_examples(cfg)
    n_cached = sum(1 for (split, _) in logit_cache if split == "train")
    if n_cached != len(encoded["train"]):
        raise DataError(
            f"cache/split size mismatch: {n_cached} train records cached, "
            f"{len(encoded['train'])} examples in the split"
        )
    train_examples = D.attach_teacher_logits(encoded["train"], logit_cache, "train")
    return run_training(cfg, train_examples, encoded["dev"], encoded["test"], vocab)


def evaluate(checkpoint: Checkpoint | str, split: str, data_dir: Optional[str] = None) -> float:
    """Accuracy of a stored checkpoint on one split, in eval mode."""
    if not isinstance(checkpoint, Checkpoint):
        checkpoint = Checkpoint.load(checkpoint)
    root = data_dir or checkpoint.train_config.data_dir
    if not root:
        raise ValueError("no data_dir: pass one or store it in the checkpoint")
    if split not in D.SPLIT_FILES:
        raise ValueError(f"split must be one of {sorted(D.SPLIT_FILES)}")
    records = D.load_split(Path(root) / D.SPLIT_FILES[split], split)
    examples = D.encode_examples(records, checkpoint.vocab, max_len=checkpoint.train_config.max_len)
    model = checkpoint.build_model()
    batches = D.make_batches(
        examples, checkpoint.train_config.batch_size, pad_floor=checkpoint.model_config.pad_floor
    )
    return evaluate_batches(model, batches)


# ---------------------------------------------------------------------------
# report output
# ---------------------------------------------------------------------------


def format_report(report: RunReport) -> str:
    """Human-readable table for one run."""
    lines = [
        f"arch={report.arch} mode={report.mode} alpha={report.alpha} "
        f"seed={report.seed} epochs={report.epochs}",
        f"{'epoch':>5}  {'train_loss':>10}  {'dev_acc':>7}",
    ]
    for i, loss in enumerate(report.train_loss_per_epoch):
        dev = f"{report.dev_acc_per_epoch[i]:.4f}" if i < len(report.dev_acc_per_epoch) else "-"
        lines.append(f"{i:>5}  {loss:>10.4f}  {dev:>7}")
    lines.append(f"selected epoch: {report.selected_epoch}")
    if report.test_acc is not None:
        lines.append(f"test accuracy: {report.test_acc:.4f}")
    lines.append(
        f"trainable params: {report.param_count:,} "
        f"(x{report.param_ratio:.1f} smaller than the 110M teacher)"
    )
    return "\n".join(lines)


def write_run_artifacts(
    checkpoint: Checkpoint, report: RunReport, out_dir
) -> Tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_path = out / "checkpoint.json"
    report_path = out / "report.json"
    checkpoint.save(ckpt_path)
    report_path.write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    return ckpt_path, report_path
