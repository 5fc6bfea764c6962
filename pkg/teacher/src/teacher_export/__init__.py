"""Export a transformer teacher's per-example logits for offline distillation."""

from .export import (
    DataFormatError,
    ExportJob,
    ModelUnavailableError,
    export_logits,
    fine_tune,
    load_model,
    load_split,
    predict_logits,
)

__version__ = "0.1.0"

__all__ = [
    "DataFormatError",
    "ExportJob",
    "ModelUnavailableError",
    "export_logits",
    "fine_tune",
    "load_model",
    "load_split",
    "predict_logits",
]
