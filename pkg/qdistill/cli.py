"""
qdistill command line

Subcommands generate synthetic data, train and evaluate students, run
inference, compare loss modes, sweep teacher quality and print the circuit
layout. Every run logs its resolved configuration and seed.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import DEFAULT_PROFILE, build_train_config, format_resolved, load_config, resolve_config
from .data import (
    SyntheticTeacherProvider,
    attach_teacher,
    make_synthetic_corpus,
    prepare_corpus,
    read_corpus,
    read_teacher_file,
    split_corpus,
    write_corpus,
    write_teacher_file,
)
from .errors import ArgumentError, DataError, QDistillError
from .model import describe_circuit
from .reporting import (
    plot_training_curve,
    render_table,
    setup_logging,
    write_metrics,
    write_timing,
)
from .train import (
    TrainConfig,
    ablation_run,
    build_embedding,
    evaluate,
    infer,
    learnability_oracle,
    teacher_quality_sweep,
    train_run,
)

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "student.ckpt"

# flag dest -> config key, for flags shared by every subcommand
OVERRIDE_FLAGS = (
    "seed", "qubits", "depth", "embed_dim", "classes", "readout", "loss_mode", "lambda2", "lr",
    "epochs", "batch_size", "repeats", "workers", "embedding_path", "teacher_accuracy", "smoothing",
    "overlap",
)


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors as exceptions instead of exiting with 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ArgumentError(f"{self.prog}: {message}")


def _banner(title: str):
    logger.info("=" * 70)
    logger.info(title)
    logger.info("=" * 70)


def _resolve(args) -> Dict:
    file_values = {}
    if args.config:
        file_values = load_config(args.config, args.profile or DEFAULT_PROFILE)
    elif args.profile:
        raise ArgumentError("--profile needs --config")
    flags = {key: getattr(args, key, None) for key in OVERRIDE_FLAGS}
    return resolve_config(file_values, flags)


def _log_resolved(resolved: Dict, seed: int):
    logger.info("Resolved configuration:")
    for line in format_resolved(resolved).splitlines():
        logger.info(f"  {line}")
    logger.info(f"Seed: {seed}")


def _load_corpus(args, config: TrainConfig, resolved: Dict, require_teacher: bool):
    examples = read_corpus(args.corpus)
    corpus = prepare_corpus(examples, config.seed)
    n_classes = config.model.n_classes
    if args.teacher:
        provider = read_teacher_file(args.teacher)
    elif args.synthetic_teacher:
        provider = SyntheticTeacherProvider(
            n_classes, accuracy=float(resolved["teacher_accuracy"]),
            smoothing=float(resolved["smoothing"]), seed=config.seed,
        )
    elif require_teacher:
        raise DataError(f"{config.loss.mode.value} loss needs teacher distributions: pass --teacher or --synthetic-teacher")
    else:
        return corpus
    return attach_teacher(corpus, provider, n_classes)


def cmd_gen_data(args, resolved: Dict) -> int:
    examples = make_synthetic_corpus(
        args.examples, int(resolved["classes"]), int(resolved["seed"]),
        overlap=float(resolved["overlap"]), words_per_class=args.words,
    )
    path = write_corpus(examples, args.out)
    logger.info(f"  ✓ Wrote {len(examples)} examples to {path}")
    return 0


def cmd_gen_teacher(args, resolved: Dict) -> int:
    examples = read_corpus(args.corpus)
    provider = SyntheticTeacherProvider(
        int(resolved["classes"]), accuracy=float(resolved["teacher_accuracy"]),
        smoothing=float(resolved["smoothing"]), seed=int(resolved["seed"]),
    )
    path = write_teacher_file(provider, examples, args.out)
    logger.info(f"  ✓ Wrote {provider.reads} teacher distributions to {path}")
    return 0


def cmd_train(args, resolved: Dict) -> int:
    config = build_train_config(resolved)
    corpus = _load_corpus(args, config, resolved, config.loss.mode.needs_teacher)
    out_dir = Path(args.out_dir)
    if args.oracle:
        accuracy = learnability_oracle(corpus, build_embedding(config))
        logger.info(f"  Learnability oracle (logistic regression on pooled embeddings): {accuracy:.4f}")

    checkpoint, report = train_run(corpus, config)
    save_checkpoint(checkpoint, out_dir / CHECKPOINT_NAME)
    write_metrics(report, out_dir / "metrics.json")
    write_timing(report, out_dir / "timing.json")
    if args.plot:
        plot_training_curve(report, out_dir / "training_curve.png")

    _banner("TRAINING SUMMARY")
    logger.info(f"  Best epoch:      {report.best_epoch}")
    logger.info(f"  Test accuracy:   {report.test.accuracy:.4f}")
    logger.info(f"  Test F1:         {report.test.f1:.4f}")
    logger.info(f"  Parameters:      {report.param_count}  ({report.parameter_proportion:.3e} of teacher)")
    logger.info(f"  Tkd:             {report.distillation_seconds:.2f}s")
    return 0


def _warn_ignored_overrides(args):
    given = [key for key in OVERRIDE_FLAGS if getattr(args, key, None) is not None]
    if given:
        flags = ", ".join("--embedding" if key == "embedding_path" else "--" + key.replace("_", "-") for key in given)
        logger.warning(f"  ⚠ Ignoring {flags}: the checkpoint configuration is used as stored")


def cmd_eval(args, resolved: Dict) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    _warn_ignored_overrides(args)
    config = checkpoint.config
    _log_resolved(config.to_dict(), config.seed)
    corpus = split_corpus(read_corpus(args.corpus), config.seed)
    examples = corpus.all_examples() if args.split == "all" else list(corpus.splits()[args.split])
    report = evaluate(checkpoint, examples)
    print(render_table([{"split": args.split, "accuracy": report.accuracy, "precision": report.precision,
                         "recall": report.recall, "f1": report.f1, "examples": report.n_examples}]))
    if args.out:
        write_metrics(report, args.out)
    return 0


def cmd_infer(args, resolved: Dict) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    _warn_ignored_overrides(args)
    _log_resolved(checkpoint.config.to_dict(), checkpoint.config.seed)
    label, probs = infer(checkpoint, args.text)
    print(f"class: {label}")
    print("probs: " + " ".join(f"{p:.6f}" for p in probs))
    return 0


def cmd_ablate(args, resolved: Dict) -> int:
    config = build_train_config(resolved)
    corpus = _load_corpus(args, config, resolved, require_teacher=True)
    report = ablation_run(corpus, config)
    out_dir = Path(args.out_dir)
    write_metrics(report, out_dir / "ablation.json")
    write_timing(report, out_dir / "ablation_timing.json")
    print(render_table(report.rows(), ["mode", "accuracy", "precision", "recall", "f1"]))

    wins, repeats = report.combined_vs_ce()
    logger.info(f"  COMBINED >= CE on {wins}/{repeats} repeats")
    if wins == 0:
        logger.error("  ✗ COMBINED underperformed CE on every repeat")
        return 1
    return 0


def cmd_sweep_teacher(args, resolved: Dict) -> int:
    config = build_train_config(resolved)
    try:
        accuracies = [float(a) for a in args.accuracies.split(",") if a.strip()]
    except ValueError:
        raise ArgumentError(f"--accuracies must be comma-separated numbers, got {args.accuracies!r}")
    corpus = prepare_corpus(read_corpus(args.corpus), config.seed)
    rows = teacher_quality_sweep(corpus, config, accuracies, smoothing=float(resolved["smoothing"]))
    write_metrics({"seed": config.seed, "config": config.to_dict(), "rows": rows},
                  Path(args.out_dir) / "teacher_sweep.json")
    table = [{"teacher_accuracy": r["teacher_accuracy"], "agreement": r["teacher_agreement"],
              "test_accuracy": r["test"]["accuracy"], "test_f1": r["test"]["f1"]} for r in rows]
    print(render_table(table))
    return 0


def cmd_describe_circuit(args, resolved: Dict) -> int:
    config = build_train_config(resolved)
    for line in describe_circuit(config.model):
        print(line)
    return 0


def _add_common(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("configuration")
    group.add_argument("--config", type=str, default=None, help="JSON config file with named profiles")
    group.add_argument("--profile", type=str, default=None,
                       help=f"Profile to use from --config (default: {DEFAULT_PROFILE})")
    group.add_argument("--seed", type=int, default=None)
    group.add_argument("--qubits", type=int, default=None)
    group.add_argument("--depth", type=int, default=None)
    group.add_argument("--embed-dim", dest="embed_dim", type=int, default=None)
    group.add_argument("--classes", type=int, default=None)
    group.add_argument("--readout", type=str, default=None, help="Comma-separated readout qubits")
    group.add_argument("--loss-mode", dest="loss_mode", type=str.upper, default=None,
                       choices=["CE", "KL", "JS", "COMBINED"])
    group.add_argument("--lambda2", type=float, default=None, help="CE weight of the combined loss")
    group.add_argument("--lr", type=float, default=None)
    group.add_argument("--epochs", type=int, default=None)
    group.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    group.add_argument("--repeats", type=int, default=None)
    group.add_argument("--workers", type=int, default=None, help="Threads for per-example gradients")
    group.add_argument("--embedding", dest="embedding_path", type=str, default=None,
                       help=".npy embedding table (rows = token ids)")
    group.add_argument("-v", "--verbose", action="store_true")


def _add_teacher_source(parser: argparse.ArgumentParser):
    parser.add_argument("--corpus", required=True, help="Corpus file (JSON lines: id, text, label)")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--teacher", default=None, help="Teacher file (JSON lines: id, probs)")
    source.add_argument("--synthetic-teacher", action="store_true",
                        help="Use the seeded synthetic teacher instead of a file")
    parser.add_argument("--teacher-accuracy", dest="teacher_accuracy", type=float, default=None)
    parser.add_argument("--smoothing", type=float, default=None)
    parser.add_argument("--out-dir", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="qdistill",
        description="Distill teacher class distributions into a simulated quantum student",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Synthetic corpus and teacher
  python -m qdistill gen-data --out data/corpus.jsonl --examples 400 --classes 2
  python -m qdistill gen-teacher --corpus data/corpus.jsonl --out data/teacher.jsonl --teacher-accuracy 0.95

  # Train with the desk profile and evaluate the result
  python -m qdistill train --config qd_config.json --profile desk --corpus data/corpus.jsonl \\
      --teacher data/teacher.jsonl --out-dir runs/desk
  python -m qdistill eval --checkpoint runs/desk/student.ckpt --corpus data/corpus.jsonl

  # Loss-mode ablation and circuit layout
  python -m qdistill ablate --config qd_config.json --corpus data/corpus.jsonl --synthetic-teacher --out-dir runs/ablation
  python -m qdistill describe-circuit --qubits 2 --depth 1
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("gen-data", help="Write a synthetic labeled corpus")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--examples", type=int, default=400)
    p.add_argument("--overlap", type=float, default=None, help="Fraction of tokens drawn from the shared pool")
    p.add_argument("--words", type=int, default=12, help="Vocabulary block size per class")
    p.set_defaults(handler=cmd_gen_data)

    p = sub.add_parser("gen-teacher", help="Write synthetic teacher distributions for a corpus")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--teacher-accuracy", dest="teacher_accuracy", type=float, default=None)
    p.add_argument("--smoothing", type=float, default=None)
    p.set_defaults(handler=cmd_gen_teacher)

    p = sub.add_parser("train", help="Distill a student and save the best-validation checkpoint")
    _add_common(p)
    _add_teacher_source(p)
    p.add_argument("--plot", action="store_true", help="Save a training-curve PNG (needs matplotlib)")
    p.add_argument("--oracle", action="store_true", help="Log the logistic-regression learnability check first")
    p.set_defaults(handler=cmd_train, log_to_out_dir=True)

    p = sub.add_parser("eval", help="Score a checkpoint on a corpus split")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=["train", "validation", "test", "all"], default="test")
    p.add_argument("--out", default=None, help="Metrics JSON file to write")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("infer", help="Classify one text with a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text", required=True)
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser("ablate", help="Compare CE, KL, JS and COMBINED from identical initializations")
    _add_common(p)
    _add_teacher_source(p)
    p.set_defaults(handler=cmd_ablate, log_to_out_dir=True)

    p = sub.add_parser("sweep-teacher", help="Distill from synthetic teachers of increasing accuracy")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--accuracies", default="0.6,0.7,0.8,0.9,0.95,1.0")
    p.add_argument("--smoothing", type=float, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_sweep_teacher, log_to_out_dir=True)

    p = sub.add_parser("describe-circuit", help="Print the gate schedule and parameter count")
    _add_common(p)
    p.set_defaults(handler=cmd_describe_circuit)
    return parser


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ArgumentError as e:
        print(f"✗ {e}", file=sys.stderr)
        return e.exit_code
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)

    log_file = None
    if getattr(args, "log_to_out_dir", False):
        log_file = Path(args.out_dir) / "train.log"
    setup_logging(log_file, verbose=args.verbose)

    try:
        resolved = _resolve(args)
        if args.command not in ("eval", "infer"):
            _banner(f"qdistill {args.command}")
            _log_resolved(resolved, resolved["seed"])
        code = args.handler(args, resolved)
    except QDistillError as e:
        logger.error(f"✗ {type(e).__name__}: {e}")
        return e.exit_code
    if code == 0:
        logger.info(f"✓ {args.command} completed")
    return code


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
