"""Exception types shared across the package.

The CLI maps these onto exit codes: usage errors -> 1, DataError (and
subclasses) -> 2, NumericsError -> 3.
"""


class TinydistillError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(TinydistillError, ValueError):
    """Tensor dimensions do not line up for the requested operation."""


class MaskError(TinydistillError, ValueError):
    """Padding mask violates the right-padding contract (or a row is all PAD)."""


class NumericsError(TinydistillError, ArithmeticError):
    """A NaN or Inf appeared; carries the name of the op that produced it."""

    def __init__(self, op: str, detail: str = ""):
        self.op = op
        msg = f"non-finite values produced by op '{op}'"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class DataError(TinydistillError, ValueError):
    """Malformed input data: TSV rows, labels, logit caches, vocab lookups."""


class VocabError(DataError):
    """Token id outside the vocabulary, or a broken vocabulary file."""


class GradCheckError(TinydistillError, RuntimeError):
    """The function under grad check produced a non-finite value."""
