"""Compact sentence classifiers trained from scratch, with optional
distillation from cached teacher logits."""

from .errors import (
    DataError,
    GradCheckError,
    MaskError,
    NumericsError,
    ShapeError,
    TinydistillError,
    VocabError,
)
from .rng import Rng
from .tensor import GradCheckReport, Tensor, grad_check
from .layers import (
    ARCHITECTURES,
    ModelConfig,
    TEACHER_PARAM_COUNT,
    build_model,
    count_params,
)
from .objectives import (
    AdamState,
    DistillWeights,
    StepLrState,
    adam_step,
    cross_entropy,
    distill_loss,
    mse_logits,
    steplr_update,
)
from .data import (
    Batch,
    LogitRecord,
    TokenizedExample,
    Vocabulary,
    build_vocab,
    load_split,
    logits_load,
    logits_save,
    make_batches,
    synthetic_teacher,
    tokenize,
)
from .harness import (
    Checkpoint,
    RunReport,
    TrainConfig,
    accuracy,
    evaluate,
    run_training,
    train_baseline,
    train_distill,
)
from .estimator import SentenceClassifier

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "AdamState",
    "Batch",
    "Checkpoint",
    "DataError",
    "DistillWeights",
    "GradCheckError",
    "GradCheckReport",
    "LogitRecord",
    "MaskError",
    "ModelConfig",
    "NumericsError",
    "Rng",
    "RunReport",
    "SentenceClassifier",
    "ShapeError",
    "StepLrState",
    "TEACHER_PARAM_COUNT",
    "Tensor",
    "TinydistillError",
    "TokenizedExample",
    "TrainConfig",
    "VocabError",
    "Vocabulary",
    "accuracy",
    "adam_step",
    "build_model",
    "build_vocab",
    "count_params",
    "cross_entropy",
    "distill_loss",
    "evaluate",
    "grad_check",
    "load_split",
    "logits_load",
    "logits_save",
    "make_batches",
    "mse_logits",
    "run_training",
    "steplr_update",
    "synthetic_teacher",
    "tokenize",
    "train_baseline",
    "train_distill",
]
