"""Command line interface.

Subcommands: train, distill, eval, params, make-synthetic-teacher,
inspect-cache. Training options may also come from a JSON config file
(--config); explicit flags win over the file. Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import data as D
from .errors import DataError, NumericsError
from .harness import (
    TrainConfig,
    evaluate,
    format_report,
    train_baseline,
    train_distill,
    write_run_artifacts,
)
from .layers import build_model, count_params
from .rng import Rng


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage problems; the spec wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


_TRAIN_FLAGS = [
    # (flag, dest, type, help)
    ("--arch", "arch", str, "architecture: bilstm | bilstm_attn | cnn"),
    ("--data", "data_dir", str, "directory holding train.tsv/dev.tsv/test.tsv"),
    ("--out", "out_dir", str, "output directory for checkpoint.json and report.json"),
    ("--seed", "seed", int, "rng seed (default 0)"),
    ("--epochs", "epochs", int, "training epochs (default 20)"),
    ("--batch-size", "batch_size", int, "mini-batch size (default 32)"),
    ("--lr", "lr", float, "Adam base learning rate (default 1e-3)"),
    ("--gamma", "gamma", float, "step decay factor (default 0.9)"),
    ("--steplr-step-size", "steplr_step_size", int, "epochs per lr decay (default 1)"),
    ("--embed-dim", "embed_dim", int, "embedding width (default 64)"),
    ("--hidden-dim", "hidden_dim", int, "recurrent width (default 64)"),
    ("--max-len", "max_len", int, "sentence truncation length (default 128)"),
    ("--min-freq", "min_freq", int, "vocabulary frequency cutoff (default 1)"),
]


def _add_train_flags(sub: argparse.ArgumentParser, distill: bool) -> None:
    sub.add_argument("--config", help="JSON file with TrainConfig fields; flags override")
    for flag, dest, typ, help_text in _TRAIN_FLAGS:
        sub.add_argument(flag, dest=dest, type=typ, default=None, help=help_text)
    if distill:
        sub.add_argument("--logits", dest="logits_path", default=None,
                         help="teacher logit cache (JSON-Lines)")
        sub.add_argument("--alpha", dest="alpha", type=float, default=None,
                         help="cross-entropy weight in the mixed loss (default 0.5)")


def build_parser() -> _Parser:
    parser = _Parser(prog="tinydistill",
                     description="Train compact sentence classifiers, optionally "
                                 "distilling from cached teacher logits.")
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")

    train = subs.add_parser("train", help="train a baseline model", parents=[])
    _add_train_flags(train, distill=False)

    distill = subs.add_parser("distill", help="train a student against a teacher-logit cache")
    _add_train_flags(distill, distill=True)

    ev = subs.add_parser("eval", help="evaluate a checkpoint on one split")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--split", choices=sorted(D.SPLIT_FILES), default="test")
    ev.add_argument("--data", dest="data_dir", default=None,
                    help="override the data dir stored in the checkpoint")

    params = subs.add_parser("params", help="print parameter count and teacher ratio")
    params.add_argument("--arch", required=True)
    params.add_argument("--vocab-size", type=int, default=None)
    params.add_argument("--data", dest="data_dir", default=None,
                        help="build the vocabulary from this data dir instead of --vocab-size")
    params.add_argument("--embed-dim", type=int, default=64)
    params.add_argument("--hidden-dim", type=int, default=64)

    synth = subs.add_parser("make-synthetic-teacher",
                            help="write a synthetic teacher-logit cache")
    synth.add_argument("--data", dest="data_dir", required=True)
    synth.add_argument("--out", required=True)
    synth.add_argument("--quality", type=float, default=1.0,
                       help="probability the teacher argmax matches the gold label")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--splits", default="train", help="comma list, e.g. train,dev,test")

    inspect = subs.add_parser("inspect-cache", help="validate a teacher-logit cache")
    inspect.add_argument("--logits", required=True)
    inspect.add_argument("--data", dest="data_dir", default=None,
                         help="also check per-split coverage against these TSVs")
    return parser


def _merged_config(args: argparse.Namespace, mode: str) -> TrainConfig:
    fields: dict = {}
    if args.config:
        try:
            fields.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config file {args.config}: {exc}") from exc
    for _, dest, _, _ in _TRAIN_FLAGS:
        value = getattr(args, dest, None)
        if value is not None:
            fields[dest] = value
    if mode == "distill":
        for dest in ("logits_path", "alpha"):
            value = getattr(args, dest, None)
            if value is not None:
                fields[dest] = value
    fields["mode"] = mode
    if not fields.get("arch"):
        raise UsageError("--arch is required (flag or config file)")
    if not fields.get("data_dir"):
        raise UsageError("--data is required (flag or config file)")
    if not fields.get("out_dir"):
        raise UsageError("--out is required (flag or config file)")
    if mode == "distill" and not fields.get("logits_path"):
        raise UsageError("--logits is required in distill mode")
    try:
        return TrainConfig.from_dict(fields)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _cmd_train(args) -> int:
    cfg = _merged_config(args, "baseline")
    checkpoint, report = train_baseline(cfg)
    ckpt_path, report_path = write_run_artifacts(checkpoint, report, cfg.out_dir)
    print(format_report(report))
    print(f"checkpoint: {ckpt_path}\nreport: {report_path}")
    return 0


def _cmd_distill(args) -> int:
    cfg = _merged_config(args, "distill")
    checkpoint, report = train_distill(cfg)
    ckpt_path, report_path = write_run_artifacts(checkpoint, report, cfg.out_dir)
    print(format_report(report))
    print(f"checkpoint: {ckpt_path}\nreport: {report_path}")
    return 0


def _cmd_eval(args) -> int:
    acc = evaluate(args.checkpoint, args.split, data_dir=args.data_dir)
    print(f"{args.split} accuracy: {acc:.6f}")
    return 0


def _cmd_params(args) -> int:
    if (args.vocab_size is None) == (args.data_dir is None):
        raise UsageError("give exactly one of --vocab-size or --data")
    if args.data_dir is not None:
        records = D.load_split(Path(args.data_dir) / D.SPLIT_FILES["train"], "train")
        vocab_size = D.build_vocab(records).size
    else:
        vocab_size = args.vocab_size
    from .layers import ModelConfig

    cfg = ModelConfig(arch=args.arch, vocab_size=vocab_size,
                      embed_dim=args.embed_dim, hidden_dim=args.hidden_dim)
    model = build_model(cfg, Rng(0))
    total, ratio = count_params(model)
    print(f"arch={args.arch} vocab={vocab_size}")
    print(f"trainable params: {total:,}")
    print(f"teacher/student ratio: x{ratio:.1f} (teacher 110,000,000)")
    return 0


def _cmd_make_synthetic_teacher(args) -> int:
    splits = [s.strip() for s in args.splits.split(",") if s.strip()]
    bad = [s for s in splits if s not in D.SPLIT_FILES]
    if bad:
        raise UsageError(f"unknown splits {bad}; choose from {sorted(D.SPLIT_FILES)}")
    rng = Rng(args.seed)
    records_out = []
    root = Path(args.data_dir)
    for split in splits:
        raw = D.load_split(root / D.SPLIT_FILES[split], split)
        # synthetic logits depend only on ids and labels, not on token content
        examples = [
            D.TokenizedExample(i, [D.UNK_ID], label) for i, (_, label) in enumerate(raw)
        ]
        records_out.extend(
            D.synthetic_teacher(examples, args.quality, rng.child(f"synthetic-{split}"), split=split)
        )
    D.logits_save(records_out, args.out)
    print(f"wrote {len(records_out)} records to {args.out} (quality={args.quality})")
    return 0


def _cmd_inspect_cache(args) -> int:
    cache = D.logits_load(args.logits)
    summary = D.cache_summary(cache)
    if not summary:
        raise DataError(f"{args.logits}: cache is empty")
    for split, info in summary.items():
        print(
            f"{split}: {info['records']} records, ids {info['min_id']}..{info['max_id']}"
            + ("" if info["contiguous_from_zero"] else " (ids NOT contiguous from 0)")
        )
    if args.data_dir:
        root = Path(args.data_dir)
        for split, info in summary.items():
            expected = len(D.load_split(root / D.SPLIT_FILES[split], split))
            if info["records"] != expected or not info["contiguous_from_zero"]:
                raise DataError(
                    f"coverage mismatch for {split}: cache has {info['records']} records, "
                    f"split has {expected} examples"
                )
            print(f"{split}: coverage OK ({expected} examples)")
    print("cache OK")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "distill": _cmd_distill,
    "eval": _cmd_eval,
    "params": _cmd_params,
    "make-synthetic-teacher": _cmd_make_synthetic_teacher,
    "inspect-cache": _cmd_inspect_cache,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            print("error: a subcommand is required", file=sys.stderr)
            return 1
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
