"""Corpus ingestion, vocabulary, batching, and the teacher-logit cache.

File formats owned here:

* splits are TSV files with the exact header ``sentence<TAB>label``, one
  UTF-8 example per line, labels 0/1 (the neutral score 2 of the source
  treebank must already be filtered out and is rejected if seen);
* the teacher-logit cache is JSON-Lines, one object per line with exactly
  the fields ``{"split": str, "id": int, "logits": [float, float]}``.
  Floats are written with full round-trip precision, and (split, id) pairs
  must be unique. An example's id is its 0-based data-row index within its
  split file, which any independent exporter can reproduce.

A small synthetic teacher lives here too: it fabricates logit records whose
argmax matches the gold label with a requested probability, which lets the
whole distillation pipeline run and be tested without any real teacher.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError
from .rng import Rng

PAD_TOKEN = "<PAD>"
UNK_TOKEN = "<UNK>"
PAD_ID = 0
UNK_ID = 1

MAX_SEQ_LEN = 128
HEADER = "sentence\tlabel"

SPLIT_FILES = {"train": "train.tsv", "dev": "dev.tsv", "test": "test.tsv"}


def tokenize(sentence: str, max_len: int = MAX_SEQ_LEN) -> List[str]:
    """Lowercase, split on Unicode whitespace, truncate to ``max_len``.

    A sentence with no tokens degenerates to a single UNK so downstream
    code never sees an empty sequence.
    """
    tokens = sentence.lower().split()
    if not tokens:
        return [UNK_TOKEN]
    return tokens[:max_len]


def load_split(path, split_tag: str) -> List[Tuple[str, int]]:
    """Read one split TSV into ordered (sentence, label) records."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {split_tag} split at {path}: {exc}") from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # trailing newline
    if not lines or lines[0].rstrip("\r") != HEADER:
        raise DataError(f"{path}:1: expected header {HEADER!r}")
    records: List[Tuple[str, int]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.rstrip("\r")
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'sentence<TAB>label', got {len(parts)} fields")
        sentence, label = parts
        if label not in ("0", "1"):
            raise DataError(
                f"{path}:{lineno}: label must be 0 or 1, got {label!r}"
                + (" (neutral items are excluded from the binary task)" if label == "2" else "")
            )
        records.append((sentence, int(label)))
    return records


class Vocabulary:
    """token -> dense id map; 0 is PAD, 1 is UNK, the rest by frequency."""

    def __init__(self, tokens_by_id: Sequence[str]):
        if list(tokens_by_id[:2]) != [PAD_TOKEN, UNK_TOKEN]:
            raise DataError("vocabulary must start with PAD, UNK")
        self.id_to_token: List[str] = list(tokens_by_id)
        self.token_to_id: Dict[str, int] = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise DataError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def encode(self, tokens: Iterable[str]) -> List[int]:
        return [self.lookup(t) for t in tokens]

    def to_dict(self) -> dict:
        return {"tokens": self.id_to_token}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(d["tokens"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def build_vocab(records: Sequence[Tuple[str, int]], min_freq: int = 1) -> Vocabulary:
    """Frequency-sorted vocabulary over the tokenized training sentences.

    Ties break lexicographically so the id assignment is deterministic.
    """
    if not records:
        raise DataError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    for sentence, _ in records:
        counts.update(tokenize(sentence))
    kept = [t for t, c in counts.items() if c >= min_freq and t not in (PAD_TOKEN, UNK_TOKEN)]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary([PAD_TOKEN, UNK_TOKEN] + kept)


@dataclass
class TokenizedExample:
    """One encoded sentence; id is the 0-based row index within its split."""

    example_id: int
    token_ids: List[int]
    label: int
    teacher_logits: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if not self.token_ids:
            raise DataError(f"example {self.example_id} has no tokens")
        if self.label not in (0, 1):
            raise DataError(f"example {self.example_id}: label must be 0 or 1")


def encode_examples(
    records: Sequence[Tuple[str, int]], vocab: Vocabulary, max_len: int = MAX_SEQ_LEN
) -> List[TokenizedExample]:
    return [
        TokenizedExample(i, vocab.encode(tokenize(sentence, max_len)), label)
        for i, (sentence, label) in enumerate(records)
    ]


@dataclass
class Batch:
    ids: np.ndarray  # int64 (B, T)
    mask: np.ndarray  # bool (B, T), True on real tokens
    labels: np.ndarray  # int64 (B,)
    example_ids: List[int]
    teacher_logits: Optional[np.ndarray] = None  # float64 (B, 2) in distill mode

    @property
    def size(self) -> int:
        return self.ids.shape[0]


def make_batches(
    examples: Sequence[TokenizedExample],
    batch_size: int = 32,
    shuffle: bool = False,
    rng: Optional[Rng] = None,
    pad_floor: int = 5,
) -> List[Batch]:
    """Chunk examples into right-padded batches covering each exactly once.

    Padding goes to the longest sequence in the batch but never below
    ``pad_floor`` (the widest CNN filter), so convolution always fits. A
    deterministic shuffle comes from the caller's Rng stream.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if shuffle:
        if rng is None:
            raise ValueError("shuffle=True needs an Rng")
        order = rng.permutation(len(examples))
    else:
        order = np.arange(len(examples))
    batches: List[Batch] = []
    for start in range(0, len(examples), batch_size):
        chunk = [examples[i] for i in order[start : start + batch_size]]
        width = max(pad_floor, max(len(ex.token_ids) for ex in chunk))
        ids = np.full((len(chunk), width), PAD_ID, dtype=np.int64)
        mask = np.zeros((len(chunk), width), dtype=bool)
        labels = np.empty(len(chunk), dtype=np.int64)
        for row, ex in enumerate(chunk):
            n = len(ex.token_ids)
            ids[row, :n] = ex.token_ids
            mask[row, :n] = True
            labels[row] = ex.label
        teacher = None
        if all(ex.teacher_logits is not None for ex in chunk):
            teacher = np.asarray([ex.teacher_logits for ex in chunk], dtype=np.float64)
        batches.append(
            Batch(ids, mask, labels, [ex.example_id for ex in chunk], teacher)
        )
    return batches


# ---------------------------------------------------------------------------
# teacher-logit cache
# ---------------------------------------------------------------------------


@dataclass
class LogitRecord:
    """One cached teacher output, keyed by (split, example_id)."""

    split: str
    example_id: int
    logit_0: float
    logit_1: float

    def __post_init__(self):
        if not (math.isfinite(self.logit_0) and math.isfinite(self.logit_1)):
            raise DataError(f"non-finite teacher logits for {self.split}/{self.example_id}")


LogitMap = Dict[Tuple[str, int], Tuple[float, float]]


def logits_save(records: Iterable[LogitRecord], path) -> None:
    """Write records as JSON-Lines with round-trip float precision."""
    seen: set[Tuple[str, int]] = set()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            key = (r.split, r.example_id)
            if key in seen:
                raise DataError(f"duplicate logit record for {key}")
            seen.add(key)
            fh.write(json.dumps({"split": r.split, "id": r.example_id, "logits": [r.logit_0, r.logit_1]}))
            fh.write("\n")


def logits_load(path) -> LogitMap:
    """Parse a cache file back into a (split, id) -> (logit_0, logit_1) map.

    Strict about the schema: exactly the three documented fields, two finite
    float logits, unique keys. Anything else raises DataError with the line.
    """
    out: LogitMap = {}
    path = Path(path)
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read logit cache {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                raise DataError(f"{path}:{lineno}: blank line in cache")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: not valid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or set(obj.keys()) != {"split", "id", "logits"}:
                raise DataError(f"{path}:{lineno}: expected exactly the fields split, id, logits")
            split, ex_id, logits = obj["split"], obj["id"], obj["logits"]
            if not isinstance(split, str):
                raise DataError(f"{path}:{lineno}: split must be a string")
            if not isinstance(ex_id, int) or isinstance(ex_id, bool) or ex_id < 0:
                raise DataError(f"{path}:{lineno}: id must be a non-negative integer")
            if (
                not isinstance(logits, list)
                or len(logits) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in logits)
                or not all(math.isfinite(float(v)) for v in logits)
            ):
                raise DataError(f"{path}:{lineno}: logits must be two finite numbers")
            key = (split, ex_id)
            if key in out:
                raise DataError(f"{path}:{lineno}: duplicate record for split={split!r} id={ex_id}")
            out[key] = (float(logits[0]), float(logits[1]))
    return out


def attach_teacher_logits(
    examples: Sequence[TokenizedExample], cache: LogitMap, split: str
) -> List[TokenizedExample]:
    """Return copies of the examples with teacher logits filled in.

    Fails loudly, naming the first uncovered example, before any training
    could start.
    """
    out: List[TokenizedExample] = []
    for ex in examples:
        key = (split, ex.example_id)
        if key not in cache:
            raise DataError(f"teacher cache has no logits for split={split!r} id={ex.example_id}")
        out.append(
            TokenizedExample(ex.example_id, list(ex.token_ids), ex.label, cache[key])
        )
    return out


def cache_summary(cache: LogitMap) -> Dict[str, dict]:
    """Per-split record counts and id ranges, for inspect-cache."""
    by_split: Dict[str, List[int]] = {}
    for (split, ex_id) in cache:
        by_split.setdefault(split, []).append(ex_id)
    summary = {}
    for split, ids in sorted(by_split.items()):
        ids.sort()
        contiguous = ids == list(range(len(ids)))
        summary[split] = {
            "records": len(ids),
            "min_id": ids[0],
            "max_id": ids[-1],
            "contiguous_from_zero": contiguous,
        }
    return summary


# ---------------------------------------------------------------------------
# synthetic teacher
# ---------------------------------------------------------------------------

MARGIN_LOW = 1.0
MARGIN_HIGH = 5.0


def synthetic_teacher(
    examples: Sequence[TokenizedExample],
    quality: float,
    rng: Rng,
    split: str = "train",
    margin_low: float = MARGIN_LOW,
    margin_high: float = MARGIN_HIGH,
) -> List[LogitRecord]:
    """Fabricate teacher logits that agree with the gold label with
    probability ``quality``.

    Per example the logit pair is (+m/2, -m/2) oriented toward the chosen
    class, with margin m drawn uniformly from [margin_low, margin_high].
    Two draws per example in a fixed order keep the output reproducible per
    seed.
    """
    if not 0.5 <= quality <= 1.0:
        raise ValueError(f"quality must be in [0.5, 1.0], got {quality}")
    records: List[LogitRecord] = []
    for ex in examples:
        agree = float(rng.random(())) < quality
        margin = float(rng.uniform(margin_low, margin_high, ()))
        chosen = ex.label if agree else 1 - ex.label
        half = margin / 2.0
        l0, l1 = (-half, half) if chosen == 1 else (half, -half)
        records.append(LogitRecord(split, ex.example_id, l0, l1))
    return records
