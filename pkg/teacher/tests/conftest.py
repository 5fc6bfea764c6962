"""Fixtures: a tiny randomly-initialized local BERT (no downloads) and toy
TSV splits in the exporter's input format."""

from pathlib import Path

import pytest
import torch


TOY_SPLITS = {
    "train": [
        ("good movie", 1), ("bad movie", 0), ("great fun film", 1),
        ("dull and tired story", 0), ("a warm charming film", 1),
        ("cold stale plot", 0), ("lovely acting", 1), ("awful scene", 0),
        ("superb fresh story", 1), ("messy bland film", 0),
    ],
    "dev": [("fine film", 1), ("bad plot", 0), ("charming story", 1)],
    "test": [("warm film", 1), ("stale film", 0)],
}


def write_tsvs(root: Path, splits=None) -> Path:
    splits = splits or TOY_SPLITS
    root.mkdir(parents=True, exist_ok=True)
    for split, rows in splits.items():
        lines = ["sentence\tlabel"] + [f"{s}\t{l}" for s, l in rows]
        (root / f"{split}.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    """A local directory holding a miniature BERT classifier + tokenizer."""
    from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

    root = tmp_path_factory.mktemp("tiny-bert")
    words = sorted({w for rows in TOY_SPLITS.values() for s, _ in rows for w in s.split()})
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + words
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")

    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=16,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=64,
        num_labels=2,
    )
    torch.manual_seed(1234)
    model = BertForSequenceClassification(config)
    model.save_pretrained(root)
    BertTokenizer(vocab_file=str(vocab_file)).save_pretrained(root)
    return str(root)


@pytest.fixture(scope="session")
def toy_data_dir(tmp_path_factory) -> str:
    return str(write_tsvs(tmp_path_factory.mktemp("toy-data")))
