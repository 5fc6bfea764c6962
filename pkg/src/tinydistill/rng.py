"""Deterministic random number generation.

All randomness in the package flows through :class:`Rng`, a thin wrapper
around numpy's counter-based Philox generator. Philox is keyed directly by
the 64-bit seed, so the same seed yields the same draw sequence on every
platform and every run. Independent substreams (weight init, shuffling,
dropout, ...) are derived by hashing a string label into a child seed, which
keeps consumers from perturbing each other's streams.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _derive_seed(seed: int, label: str) -> int:
    h = hashlib.blake2b(f"{seed}:{label}".encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


class Rng:
    """Seeded Philox stream with named, independently-seeded substreams."""

    algorithm = "philox"

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def child(self, label: str) -> "Rng":
        """Derive an independent stream; same (seed, label) -> same stream."""
        return Rng(_derive_seed(self.seed, label))

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape).astype(np.float64)

    def random(self, shape) -> np.ndarray:
        return self._gen.random(size=shape, dtype=np.float64)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray:
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, algorithm={self.algorithm!r})"
