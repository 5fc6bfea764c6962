"""Shared corpus builders for the test suite.

The toy task is deliberately word-separable: positive sentences draw from
one sentiment pool, negative from another, padded with shared filler words.
Label noise (for the denoising experiments) flips a seeded fraction of
training labels after the clean corpus is generated.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

POSITIVE_WORDS = ["good", "great", "fine", "lovely", "superb", "charming", "warm", "fresh"]
NEGATIVE_WORDS = ["bad", "awful", "dull", "bland", "tired", "messy", "cold", "stale"]
FILLER_WORDS = ["the", "movie", "plot", "acting", "scene", "film", "story", "its", "was", "a"]


def make_toy_records(
    n: int, seed: int, min_len: int = 4, max_len: int = 9, signal_words: int = 2
) -> List[Tuple[str, int]]:
    """Balanced, separable (sentence, label) records."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    records = []
    for i in range(n):
        label = i % 2
        pool = POSITIVE_WORDS if label == 1 else NEGATIVE_WORDS
        length = int(rng.integers(min_len, max_len + 1))
        k = min(signal_words, length)
        words = [pool[int(rng.integers(0, len(pool)))] for _ in range(k)]
        words += [FILLER_WORDS[int(rng.integers(0, len(FILLER_WORDS)))] for _ in range(length - k)]
        order = rng.permutation(len(words))
        records.append((" ".join(words[j] for j in order), label))
    return records


def flip_labels(
    records: Sequence[Tuple[str, int]], fraction: float, seed: int
) -> List[Tuple[str, int]]:
    """Return a copy with a seeded ``fraction`` of labels inverted."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    n = len(records)
    flipped = set(rng.permutation(n)[: int(round(fraction * n))].tolist())
    return [
        (sentence, 1 - label if i in flipped else label)
        for i, (sentence, label) in enumerate(records)
    ]


def write_split(path: Path, records: Sequence[Tuple[str, int]]) -> Path:
    lines = ["sentence\tlabel"] + [f"{s}\t{l}" for s, l in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_corpus_dir(
    root: Path,
    train: Sequence[Tuple[str, int]],
    dev: Sequence[Tuple[str, int]],
    test: Sequence[Tuple[str, int]],
) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    write_split(root / "train.tsv", train)
    write_split(root / "dev.tsv", dev)
    write_split(root / "test.tsv", test)
    return root
