"""The three student architectures and their building blocks.

Everything here is a pure forward computation over a batch: token ids plus a
right-padding mask go in, 2-class logits come out. Parameters live in small
containers of ``Tensor`` leaves so the optimizer, checkpointing and gradient
checks can walk them by name.

Conventions:
* masks are boolean numpy arrays (B, T), True for real tokens, and must be a
  True-prefix of each row (right padding only);
* PAD is token id 0, embeds to the zero vector and receives no gradient;
* LSTM gate packing order is input, forget, cell, output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .errors import MaskError, ShapeError
from .rng import Rng
from . import tensor as T
from .tensor import Tensor

ARCHITECTURES = ("bilstm", "bilstm_attn", "cnn")

# Reference point for the complexity ratio: parameter count of the
# teacher-scale transformer the students are compared against.
TEACHER_PARAM_COUNT = 110_000_000

PAD_ID = 0


@dataclass
class ModelConfig:
    """Complete declarative description of one student architecture."""

    arch: str
    vocab_size: int
    embed_dim: int = 64
    hidden_dim: int = 64
    kernel_widths: Tuple[int, ...] = (3, 4, 5)
    cnn_hidden_dim: int = 64
    dropout_rate: float = 0.5
    num_classes: int = 2
    max_len: int = 128

    def __post_init__(self):
        self.kernel_widths = tuple(int(w) for w in self.kernel_widths)
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}, expected one of {ARCHITECTURES}")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must cover at least PAD and UNK")
        if min(self.embed_dim, self.hidden_dim, self.cnn_hidden_dim, self.max_len) < 1:
            raise ValueError("dims must be positive")
        if any(w < 1 for w in self.kernel_widths) or max(self.kernel_widths) > self.max_len:
            raise ValueError(f"bad kernel widths {self.kernel_widths}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def pad_floor(self) -> int:
        """Minimum padded length every batch must reach (widest CNN filter)."""
        return max(self.kernel_widths)

    def to_dict(self) -> dict:
        return {
            "arch": self.arch,
            "vocab_size": self.vocab_size,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "kernel_widths": list(self.kernel_widths),
            "cnn_hidden_dim": self.cnn_hidden_dim,
            "dropout_rate": self.dropout_rate,
            "num_classes": self.num_classes,
            "max_len": self.max_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["kernel_widths"] = tuple(d.get("kernel_widths", (3, 4, 5)))
        return cls(**d)


def _uniform_init(rng: Rng, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------


class EmbeddingTable:
    """Learned word vectors; row 0 (PAD) stays zero for good."""

    def __init__(self, vocab_size: int, dim: int, rng: Rng):
        w = _uniform_init(rng, (vocab_size, dim), fan_in=dim)
        w[PAD_ID] = 0.0
        self.vocab_size = vocab_size
        self.dim = dim
        self.weights = Tensor(w, requires_grad=True)

    def params(self, prefix: str) -> Dict[str, Tensor]:
        return {f"{prefix}.weights": self.weights}

    def trainable_count(self) -> int:
        # PAD row never trains
        return (self.vocab_size - 1) * self.dim


class LstmDirectionParams:
    def __init__(self, input_dim: int, hidden_dim: int, rng: Rng):
        h = hidden_dim
        self.w_x = Tensor(_uniform_init(rng, (4 * h, input_dim), fan_in=input_dim), requires_grad=True)
        self.w_h = Tensor(_uniform_init(rng, (4 * h, h), fan_in=h), requires_grad=True)
        b = np.zeros(4 * h)
        b[h : 2 * h] = 1.0  # forget-gate bias; helps short training runs
        self.b = Tensor(b, requires_grad=True)
        self.hidden_dim = h

    def params(self, prefix: str) -> Dict[str, Tensor]:
        return {f"{prefix}.w_x": self.w_x, f"{prefix}.w_h": self.w_h, f"{prefix}.b": self.b}


class BiLstmParams:
    """Independent forward and backward recurrences over the same inputs."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: Rng):
        self.fwd = LstmDirectionParams(input_dim, hidden_dim, rng)
        self.bwd = LstmDirectionParams(input_dim, hidden_dim, rng)
        self.hidden_dim = hidden_dim

    def params(self, prefix: str) -> Dict[str, Tensor]:
        out = self.fwd.params(f"{prefix}.fwd")
        out.update(self.bwd.params(f"{prefix}.bwd"))
        return out


class AttentionParams:
    def __init__(self, dim: int, rng: Rng):
        self.w = Tensor(_uniform_init(rng, (dim, dim), fan_in=dim), requires_grad=True)
        self.b = Tensor(np.zeros(dim), requires_grad=True)
        # learned context vector the per-token projections are scored against
        self.u_w = Tensor(_uniform_init(rng, (dim,), fan_in=dim), requires_grad=True)
        self.dim = dim

    def params(self, prefix: str) -> Dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b, f"{prefix}.u_w": self.u_w}


class CnnParams:
    """One 1-D filter per kernel width, spanning the full embedding depth."""

    def __init__(self, embed_dim: int, kernel_widths: Tuple[int, ...], rng: Rng):
        self.kernel_widths = tuple(kernel_widths)
        self.filters: List[Tensor] = []
        self.biases: List[Tensor] = []
        for w in self.kernel_widths:
            self.filters.append(
                Tensor(_uniform_init(rng, (embed_dim, w), fan_in=w * embed_dim), requires_grad=True)
            )
            self.biases.append(Tensor(np.zeros(1), requires_grad=True))

    def params(self, prefix: str) -> Dict[str, Tensor]:
        out: Dict[str, Tensor] = {}
        for w, f, b in zip(self.kernel_widths, self.filters, self.biases):
            out[f"{prefix}.filter_w{w}"] = f
            out[f"{prefix}.bias_w{w}"] = b
        return out


class DenseParams:
    def __init__(self, out_dim: int, in_dim: int, rng: Rng):
        self.w = Tensor(_uniform_init(rng, (out_dim, in_dim), fan_in=in_dim), requires_grad=True)
        self.b = Tensor(np.zeros(out_dim), requires_grad=True)

    def params(self, prefix: str) -> Dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


# ---------------------------------------------------------------------------
# forward computations
# ---------------------------------------------------------------------------


def _check_mask(mask: np.ndarray, batch: int, length: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (batch, length):
        raise MaskError(f"mask shape {mask.shape} does not match ids ({batch}, {length})")
    if length and not mask[:, 0].all():
        raise MaskError("every sequence needs at least one real token")
    if (~mask[:, :-1] & mask[:, 1:]).any():
        raise MaskError("mask must be a True-prefix per row (right padding only)")
    return mask


def embed(ids: np.ndarray, table: EmbeddingTable) -> Tensor:
    """Look up word vectors: (B, T) int ids -> (B, T, d)."""
    return T.embedding_lookup(table.weights, np.asarray(ids), pad_id=PAD_ID)


def _lstm_direction(
    x: Tensor, mask: np.ndarray, p: LstmDirectionParams, reverse: bool
) -> Tuple[List[Tensor], Tensor]:
    """Run one LSTM direction; returns per-step outputs (zeroed at padding)
    and the final carried state.

    Padded steps neither advance the state nor emit output, so appending PAD
    tokens can never change the result.
    """
    batch, length, _ = x.shape
    h = p.hidden_dim
    zeros_bias = Tensor(np.zeros(4 * h))
    state_h = Tensor(np.zeros((batch, h)))
    state_c = Tensor(np.zeros((batch, h)))
    outputs: List[Tensor] = [None] * length  # type: ignore[list-item]
    order = range(length - 1, -1, -1) if reverse else range(length)
    for t in order:
        x_t = T.time_slice(x, t)
        z = T.add(T.linear(x_t, p.w_x, p.b), T.linear(state_h, p.w_h, zeros_bias))
        gate_i = T.sigmoid(T.slice_cols(z, 0, h))
        gate_f = T.sigmoid(T.slice_cols(z, h, 2 * h))
        gate_g = T.tanh(T.slice_cols(z, 2 * h, 3 * h))
        gate_o = T.sigmoid(T.slice_cols(z, 3 * h, 4 * h))
        c_cand = T.add(T.mul(gate_f, state_c), T.mul(gate_i, gate_g))
        h_cand = T.mul(gate_o, T.tanh(c_cand))
        m = mask[:, t].astype(np.float64).reshape(batch, 1)
        state_c = T.add(T.scale_rows(c_cand, m), T.scale_rows(state_c, 1.0 - m))
        state_h = T.add(T.scale_rows(h_cand, m), T.scale_rows(state_h, 1.0 - m))
        outputs[t] = T.scale_rows(h_cand, m)
    return outputs, state_h


def bilstm_forward(
    x: Tensor, mask: np.ndarray, p: BiLstmParams
) -> Tuple[Tensor, Tensor]:
    """Both directions over (B, T, d) inputs.

    Returns (seq_out, final): seq_out is (B, T, 2h) with zero rows at padded
    positions; final concatenates the forward state after the last real token
    with the backward state after the first token, (B, 2h).
    """
    batch, length, _ = x.shape
    mask = _check_mask(mask, batch, length)
    out_f, final_f = _lstm_direction(x, mask, p.fwd, reverse=False)
    out_b, final_b = _lstm_direction(x, mask, p.bwd, reverse=True)
    steps = [T.concat([out_f[t], out_b[t]], axis=1) for t in range(length)]
    seq_out = T.stack_time(steps)
    final = T.concat([final_f, final_b], axis=1)
    return seq_out, final


def attention_forward(
    seq: Tensor, mask: np.ndarray, p: AttentionParams
) -> Tuple[Tensor, Tensor]:
    """Self-attention pooling of (B, T, H) hidden states into (B, H).

    Per token: u = tanh(W h + b); score = u . u_w. Scores at padded
    positions are excluded from the softmax, so the weights form a
    probability distribution over real tokens only. The sentence vector is
    the weight-averaged sum of the hidden states.
    """
    batch, length, width = seq.shape
    if width != p.dim:
        raise ShapeError(f"attention: seq width {width} != params dim {p.dim}")
    mask = _check_mask(mask, batch, length)
    flat = T.reshape(seq, (batch * length, width))
    u = T.tanh(T.linear(flat, p.w, p.b))
    scores = T.reshape(T.matmul(u, T.reshape(p.u_w, (width, 1))), (batch, length))
    weights = T.masked_softmax_rows(scores, mask)
    pooled = T.weighted_time_sum(seq, weights)
    return pooled, weights


def cnn_forward(x: Tensor, mask: np.ndarray, p: CnnParams) -> Tensor:
    """Per kernel: valid 1-D convolution along time, ReLU, max pooling.

    Pooling ranges over the windows lying inside the real tokens; a sentence
    shorter than the filter falls back to the single window anchored at
    position 0 (its PAD tail embeds to zeros). Windows that only exist
    because of batch padding are excluded, so features never depend on how
    far a batch happened to be padded. Returns (B, K).
    """
    batch, length, depth = x.shape
    mask = _check_mask(mask, batch, length)
    lengths = mask.sum(axis=1)
    features: List[Tensor] = []
    for width, filt, bias in zip(p.kernel_widths, p.filters, p.biases):
        if length < width:
            raise ShapeError(
                f"padded length {length} is shorter than filter width {width}; "
                "the batcher should have padded up to the widest filter"
            )
        positions = length - width + 1
        conv: Tensor | None = None
        for j in range(width):
            window = T.reshape(T.time_window(x, j, positions), (batch * positions, depth))
            column = T.slice_cols(filt, j, j + 1)
            term = T.reshape(T.matmul(window, column), (batch, positions))
            conv = term if conv is None else T.add(conv, term)
        conv = T.add(conv, bias)
        activated = T.relu(conv)
        # last admissible start: length - width, or 0 for sentences shorter
        # than the filter
        last_start = np.maximum(lengths - width, 0)
        eligible = np.arange(positions)[None, :] <= last_start[:, None]
        features.append(T.masked_max_over_time(activated, eligible))
    return T.concat(features, axis=1)


def dense(x: Tensor, p: DenseParams) -> Tensor:
    return T.linear(x, p.w, p.b)


dropout = T.dropout


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


class Model:
    """Shared surface: params(), forward(ids, mask, mode) -> logits (B, 2)."""

    cfg: ModelConfig

    def params(self) -> Dict[str, Tensor]:
        raise NotImplementedError

    def forward(self, ids, mask, mode: str = "eval", dropout_rng: Rng | None = None) -> Tensor:
        raise NotImplementedError

    def load_params(self, arrays: Dict[str, np.ndarray]) -> None:
        """Overwrite parameter values in place (checkpoint restore)."""
        own = self.params()
        missing = own.keys() - arrays.keys()
        extra = arrays.keys() - own.keys()
        if missing or extra:
            raise ValueError(f"parameter names mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, p in own.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ShapeError(f"checkpoint shape {arr.shape} != model shape {p.data.shape} for {name}")
            p.data[...] = arr

    def export_params(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params().items()}


class BiLstmModel(Model):
    def __init__(self, cfg: ModelConfig, rng: Rng):
        self.cfg = cfg
        self.embedding = EmbeddingTable(cfg.vocab_size, cfg.embed_dim, rng)
        self.lstm = BiLstmParams(cfg.embed_dim, cfg.hidden_dim, rng)
        self.head = DenseParams(cfg.num_classes, 2 * cfg.hidden_dim, rng)

    def params(self) -> Dict[str, Tensor]:
        out = self.embedding.params("embedding")
        out.update(self.lstm.params("lstm"))
        out.update(self.head.params("head"))
        return out

    def forward(self, ids, mask, mode: str = "eval", dropout_rng: Rng | None = None) -> Tensor:
        x = embed(ids, self.embedding)
        _, final = bilstm_forward(x, mask, self.lstm)
        return dense(final, self.head)


class BiLstmAttnModel(Model):
    def __init__(self, cfg: ModelConfig, rng: Rng):
        self.cfg = cfg
        self.embedding = EmbeddingTable(cfg.vocab_size, cfg.embed_dim, rng)
        self.lstm = BiLstmParams(cfg.embed_dim, cfg.hidden_dim, rng)
        self.attention = AttentionParams(2 * cfg.hidden_dim, rng)
        self.head = DenseParams(cfg.num_classes, 2 * cfg.hidden_dim, rng)

    def params(self) -> Dict[str, Tensor]:
        out = self.embedding.params("embedding")
        out.update(self.lstm.params("lstm"))
        out.update(self.attention.params("attention"))
        out.update(self.head.params("head"))
        return out

    def forward(self, ids, mask, mode: str = "eval", dropout_rng: Rng | None = None) -> Tensor:
        x = embed(ids, self.embedding)
        seq, _ = bilstm_forward(x, mask, self.lstm)
        pooled, _ = attention_forward(seq, mask, self.attention)
        return dense(pooled, self.head)


class CnnModel(Model):
    def __init__(self, cfg: ModelConfig, rng: Rng):
        self.cfg = cfg
        self.embedding = EmbeddingTable(cfg.vocab_size, cfg.embed_dim, rng)
        self.conv = CnnParams(cfg.embed_dim, cfg.kernel_widths, rng)
        k = len(cfg.kernel_widths)
        self.hidden = DenseParams(cfg.cnn_hidden_dim, k, rng)
        self.head = DenseParams(cfg.num_classes, cfg.cnn_hidden_dim, rng)

    def params(self) -> Dict[str, Tensor]:
        out = self.embedding.params("embedding")
        out.update(self.conv.params("conv"))
        out.update(self.hidden.params("hidden"))
        out.update(self.head.params("head"))
        return out

    def forward(self, ids, mask, mode: str = "eval", dropout_rng: Rng | None = None) -> Tensor:
        if mode == "train" and self.cfg.dropout_rate > 0.0 and dropout_rng is None:
            raise ValueError("CNN training forward needs a dropout rng")
        x = embed(ids, self.embedding)
        feats = cnn_forward(x, mask, self.conv)
        feats = dropout(feats, self.cfg.dropout_rate, mode, dropout_rng)
        hid = T.relu(dense(feats, self.hidden))
        return dense(hid, self.head)


_MODEL_CLASSES = {
    "bilstm": BiLstmModel,
    "bilstm_attn": BiLstmAttnModel,
    "cnn": CnnModel,
}


def build_model(cfg: ModelConfig, rng: Rng) -> Model:
    """Instantiate an architecture with seeded initialization.

    The same (cfg, rng seed) always produces bitwise-identical weights:
    parameters are drawn in a fixed construction order from the given stream.
    """
    try:
        cls = _MODEL_CLASSES[cfg.arch]
    except KeyError:
        raise ValueError(f"unknown architecture {cfg.arch!r}") from None
    return cls(cfg, rng)


def count_params(model: Model) -> Tuple[int, float]:
    """Total trainable scalars (PAD embedding row excluded) and the
    complexity ratio teacher_params / total."""
    total = sum(p.size for p in model.params().values())
    total -= model.cfg.embed_dim  # PAD row is frozen
    return total, TEACHER_PARAM_COUNT / total
