"""Teacher-side logit export.

Loads (and optionally fine-tunes) a HuggingFace sequence classifier, runs
every example of every split through it, and writes one JSON-Lines record
per example:

    {"split": "train", "id": 0, "logits": [1.53, -0.87]}

Raw pre-softmax logits are exported because the downstream distillation
objective is defined on logits, not probabilities. An example's id is its
0-based data-row index within its split TSV, so any consumer can rebuild
the keys independently. The output file is written atomically.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import torch

HEADER = "sentence\tlabel"
SPLIT_FILES = {"train": "train.tsv", "dev": "dev.tsv", "test": "test.tsv"}


class DataFormatError(ValueError):
    """Malformed TSV input."""


class ModelUnavailableError(RuntimeError):
    """The requested model could not be loaded."""


@dataclass
class ExportJob:
    data_dir: str
    out_path: str
    model: str = "bert-base-uncased"
    fine_tune: bool = False
    epochs: int = 2
    seed: int = 0
    batch_size: int = 32
    max_length: int = 128
    learning_rate: float = 2e-5
    splits: Tuple[str, ...] = ("train", "dev", "test")

    def __post_init__(self):
        self.splits = tuple(self.splits)
        unknown = [s for s in self.splits if s not in SPLIT_FILES]
        if unknown:
            raise ValueError(f"unknown splits {unknown}; choose from {sorted(SPLIT_FILES)}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def load_split(path) -> List[Tuple[str, int]]:
    """Read one `sentence<TAB>label` TSV (header required, labels 0/1)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read split {path}: {exc}") from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != HEADER:
        raise DataFormatError(f"{path}:1: expected header {HEADER!r}")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.rstrip("\r").split("\t")
        if len(parts) != 2 or parts[1] not in ("0", "1"):
            raise DataFormatError(f"{path}:{lineno}: expected 'sentence<TAB>0|1'")
        records.append((parts[0], int(parts[1])))
    return records


def load_model(name_or_path: str):
    """Resolve a model id or local directory into (tokenizer, model)."""
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(name_or_path)
        model = AutoModelForSequenceClassification.from_pretrained(
            name_or_path, num_labels=2
        )
    except Exception as exc:  # transformers raises a zoo of types here
        raise ModelUnavailableError(
            f"could not load model {name_or_path!r}: {exc}\n"
            "Pass a local model directory, or pre-download the model with\n"
            f"  python -c \"from transformers import AutoModelForSequenceClassification as M; "
            f"M.from_pretrained('{name_or_path}')\"\n"
            "on a machine with network access and point --model at the cache."
        ) from exc
    model.eval()
    return tokenizer, model


def _encode(tokenizer, sentences: Sequence[str], max_length: int):
    return tokenizer(
        list(sentences),
        padding=True,
        truncation=True,
        max_length=max_length,
        return_tensors="pt",
    )


def predict_logits(model, tokenizer, sentences: Sequence[str], batch_size: int,
                   max_length: int) -> np.ndarray:
    """In-order batched inference; returns float64 logits (n, 2)."""
    model.eval()
    chunks = []
    with torch.no_grad():
        for start in range(0, len(sentences), batch_size):
            enc = _encode(tokenizer, sentences[start : start + batch_size], max_length)
            chunks.append(model(**enc).logits.double().cpu().numpy())
    return np.concatenate(chunks, axis=0)


def fine_tune(model, tokenizer, records: Sequence[Tuple[str, int]], job: ExportJob) -> None:
    """Minimal recipe: AdamW at job.learning_rate, cross-entropy via the
    model head, seeded per-epoch shuffling, no warmup or weight decay."""
    torch.manual_seed(job.seed)
    generator = torch.Generator().manual_seed(job.seed)
    optimizer = torch.optim.AdamW(model.parameters(), lr=job.learning_rate)
    sentences = [s for s, _ in records]
    labels = torch.tensor([l for _, l in records], dtype=torch.long)
    model.train()
    for _ in range(job.epochs):
        order = torch.randperm(len(records), generator=generator)
        for start in range(0, len(records), job.batch_size):
            idx = order[start : start + job.batch_size]
            enc = _encode(tokenizer, [sentences[i] for i in idx.tolist()], job.max_length)
            out = model(**enc, labels=labels[idx])
            optimizer.zero_grad()
            out.loss.backward()
            optimizer.step()
    model.eval()


def export_logits(job: ExportJob) -> Dict[str, dict]:
    """Run the teacher over every configured split and write the cache.

    Returns a summary with per-split sizes and teacher accuracy. Aborts if
    the number of emitted records ever disagrees with the TSV row count.
    """
    tokenizer, model = load_model(job.model)
    data_root = Path(job.data_dir)
    corpus = {split: load_split(data_root / SPLIT_FILES[split]) for split in job.splits}

    if job.fine_tune:
        if "train" not in corpus:
            raise ValueError("--fine-tune needs the train split")
        fine_tune(model, tokenizer, corpus["train"], job)

    summary: Dict[str, dict] = {
        "model": job.model,
        "fine_tuned": job.fine_tune,
        "splits": {},
    }
    out_path = Path(job.out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=out_path.parent, suffix=".jsonl.part")
    try:
        written = 0
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            for split, records in corpus.items():
                logits = predict_logits(
                    model, tokenizer, [s for s, _ in records], job.batch_size, job.max_length
                )
                if logits.shape[0] != len(records):
                    raise RuntimeError(
                        f"row-count mismatch for {split}: {logits.shape[0]} logit rows "
                        f"vs {len(records)} TSV rows"
                    )
                for i, (_, label) in enumerate(records):
                    fh.write(json.dumps({
                        "split": split,
                        "id": i,
                        "logits": [float(logits[i, 0]), float(logits[i, 1])],
                    }))
                    fh.write("\n")
                    written += 1
                preds = logits.argmax(axis=1)
                gold = np.array([l for _, l in records])
                summary["splits"][split] = {
                    "examples": len(records),
                    "accuracy": float((preds == gold).mean()),
                }
        if written != sum(len(r) for r in corpus.values()):
            raise RuntimeError("emitted record count does not cover the corpus")
        os.replace(tmp_name, out_path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return summary
