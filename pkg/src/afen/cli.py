"""Command-line entry point.

    afen synth-corpus --out DIR [--clips-per-class N] [--seed S]
    afen prepare  --corpus-dir DIR --output-dir DIR [--config FILE] [...]
    afen extract  --output-dir DIR [...]
    afen train    {cnn,gbdt,ensemble} --output-dir DIR [...]
    afen evaluate --output-dir DIR [...]
    afen predict  --model-dir DIR --wav FILE [--model M] [--top-k K]

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import pipeline, synth
from .config import RunConfig, load_config
from .errors import AfenError
from .pipeline import RunLock


def _add_config_args(p: argparse.ArgumentParser, need_corpus: bool = False) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--corpus-dir", dest="corpus_dir", required=False)
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.add_argument("--seed", type=int, dest="seed")
    p.add_argument("--cnn-epochs", type=int, dest="cnn_epochs")
    p.add_argument("--cnn-batch-size", type=int, dest="cnn_batch_size")
    p.add_argument("--cnn-learning-rate", type=float, dest="cnn_learning_rate")
    p.add_argument("--cnn-dropout", type=float, dest="cnn_dropout")
    p.add_argument("--gbdt-rounds", type=int, dest="gbdt_rounds")
    p.add_argument("--test-fraction", type=float, dest="test_fraction")
    p.add_argument("--val-fraction", type=float, dest="val_fraction")
    p.add_argument("--split-by", choices=("recording", "patient"), dest="split_by")
    p.add_argument("--ensemble-mode", choices=("fixed", "calibrated"), dest="ensemble_mode")
    p.add_argument("--ensemble-weight", type=float, dest="ensemble_weight")
    p.add_argument("--class-balanced-augment", action="store_const", const=True,
                   dest="class_balanced_augment")


_CONFIG_KEYS = [
    "corpus_dir", "output_dir", "seed",
    "cnn_epochs", "cnn_batch_size", "cnn_learning_rate", "cnn_dropout",
    "gbdt_rounds", "test_fraction", "val_fraction", "split_by",
    "ensemble_mode", "ensemble_weight", "class_balanced_augment",
]


def _config_from_args(args: argparse.Namespace, need_corpus: bool) -> RunConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    config = load_config(args.config, overrides)
    config.validate(need_corpus=need_corpus)
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afen", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-corpus", help="generate the synthetic 8-class corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--clips-per-class", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("prepare", help="split, standardize, and augment the corpus")
    _add_config_args(p, need_corpus=True)

    p = sub.add_parser("extract", help="compute feature caches for prepared clips")
    _add_config_args(p)

    p = sub.add_parser("train", help="train a model and emit its report")
    p.add_argument("which", choices=("cnn", "gbdt", "ensemble"))
    _add_config_args(p)

    p = sub.add_parser("evaluate", help="recompute reports for trained models")
    _add_config_args(p)

    p = sub.add_parser("predict", help="classify a single WAV file")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--model", choices=("cnn", "gbdt", "ensemble"), default="ensemble")
    p.add_argument("--top-k", type=int, default=3)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth-corpus":
            paths = synth.generate_corpus(args.out, args.clips_per_class, args.seed)
            print(f"wrote {len(paths)} clips to {args.out}")
        elif args.command == "prepare":
            config = _config_from_args(args, need_corpus=True)
            with RunLock(config.output_dir):
                entries = pipeline.cmd_prepare(config)
            n_aug = sum(1 for e in entries if e.augmentation != "original")
            print(f"prepared {len(entries)} clips ({n_aug} augmented) in {config.output_dir}")
        elif args.command == "extract":
            config = _config_from_args(args, need_corpus=False)
            with RunLock(config.output_dir):
                pipeline.cmd_extract(config)
            print(f"feature caches written under {config.output_dir}/features")
        elif args.command == "train":
            config = _config_from_args(args, need_corpus=False)
            with RunLock(config.output_dir):
                written = pipeline.cmd_train(config, args.which)
            for path in written:
                print(path)
        elif args.command == "evaluate":
            config = _config_from_args(args, need_corpus=False)
            with RunLock(config.output_dir):
                written = pipeline.cmd_evaluate(config)
            for path in written:
                print(path)
        elif args.command == "predict":
            result = pipeline.cmd_predict(args.model_dir, args.wav, args.model, args.top_k)
            print(json.dumps(result, indent=2))
    except AfenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
