"""`export-logits` command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 model unavailable.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .export import DataFormatError, ExportJob, ModelUnavailableError, export_logits


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="export-logits",
        description="Run a transformer sequence classifier over TSV splits and "
                    "cache its raw logits as JSON-Lines for offline distillation.",
    )
    parser.add_argument("--model", default="bert-base-uncased",
                        help="model id or local model directory (default bert-base-uncased)")
    parser.add_argument("--data", required=True,
                        help="directory holding train.tsv/dev.tsv/test.tsv")
    parser.add_argument("--out", required=True, help="output cache path (JSON-Lines)")
    parser.add_argument("--fine-tune", action="store_true",
                        help="fine-tune on the train split before exporting")
    parser.add_argument("--epochs", type=int, default=2, help="fine-tuning epochs")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--max-length", type=int, default=128)
    parser.add_argument("--lr", type=float, default=2e-5, help="fine-tuning learning rate")
    parser.add_argument("--splits", default="train,dev,test", help="comma list of splits")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        job = ExportJob(
            data_dir=args.data,
            out_path=args.out,
            model=args.model,
            fine_tune=args.fine_tune,
            epochs=args.epochs,
            seed=args.seed,
            batch_size=args.batch_size,
            max_length=args.max_length,
            splits=tuple(s.strip() for s in args.splits.split(",") if s.strip()),
            learning_rate=args.lr,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        summary = export_logits(job)
    except ModelUnavailableError as exc:
        print(f"model unavailable: {exc}", file=sys.stderr)
        return 3
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, indent=2))
    return 0


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
