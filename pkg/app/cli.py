import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from app.core.config import get_settings, load_model_config
from app.core.errors import CheckpointError, ConfigError, DataValidationError, NumericError, SegRNNError
from app.core.logging import setup_logging
from app.data.corpus import load_corpus, load_ontology
from app.data.embeddings import load_pretrained
from app.data.trees import load_trees
from app.db.repository import RunRepository
from app.training.checkpoint import inspect_checkpoint
from app.training.predict import MODES, EnsembleParser, evaluate, predict, read_predictions, write_predictions
from app.training.trainer import train_arg, train_ensemble, train_frame

logger = logging.getLogger("SegRNN.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; 2 is reserved for data errors here."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _repository() -> Optional[RunRepository]:
    db_path = get_settings().db_path
    if not db_path:
        return None
    repository = RunRepository(db_path)
    repository.init_schema()
    return repository


def _training_inputs(args: argparse.Namespace, config):
    ontology = load_ontology(args.ontology)
    train = load_corpus(args.train, ontology)
    dev = load_corpus(args.dev, ontology) if args.dev else []
    pretrained = load_pretrained(args.embeddings, config.pretrained_dim) if args.embeddings else None
    return ontology, train, dev, pretrained


def cmd_train_arg(args: argparse.Namespace) -> int:
    config = load_model_config(args.config, args.set)
    ontology, train, dev, pretrained = _training_inputs(args, config)
    trees = load_trees(args.trees, config.max_span_length) if args.trees else []
    corpora = dict(train=train, dev=dev, ontology=ontology, pretrained=pretrained, trees=trees)
    if args.ensemble:
        results = train_ensemble("arg", config, args.output, args.seed, args.workers, get_settings().db_path or None, **corpora)
        print(json.dumps([{"checkpoint": r.checkpoint_path, "best_f1": r.best_metric} for r in results], indent=2))
    else:
        result = train_arg(config, output_path=args.output, seed=args.seed, repository=_repository(), **corpora)
        print(json.dumps({"checkpoint": result.checkpoint_path, "best_f1": result.best_metric, "best_epoch": result.best_epoch}))
    return EXIT_OK


def cmd_train_frame(args: argparse.Namespace) -> int:
    config = load_model_config(args.config, args.set)
    ontology, train, dev, pretrained = _training_inputs(args, config)
    corpora = dict(train=train, dev=dev, ontology=ontology, pretrained=pretrained)
    if args.ensemble:
        results = train_ensemble("frame", config, args.output, args.seed, args.workers, get_settings().db_path or None, **corpora)
        print(json.dumps([{"checkpoint": r.checkpoint_path, "best_accuracy": r.best_metric} for r in results], indent=2))
    else:
        result = train_frame(config, output_path=args.output, seed=args.seed, repository=_repository(), **corpora)
        print(json.dumps({"checkpoint": result.checkpoint_path, "best_accuracy": result.best_metric, "best_epoch": result.best_epoch}))
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    if args.mode != "frames" and not args.arg_checkpoint:
        raise UsageError(f"--arg-checkpoint is required for mode {args.mode}")
    if args.mode != "args-gold-frames" and not args.frame_checkpoint:
        raise UsageError(f"--frame-checkpoint is required for mode {args.mode}")
    ontology = load_ontology(args.ontology) if args.ontology else None
    sentences = load_corpus(args.corpus, ontology)
    parser = EnsembleParser.from_checkpoints(args.arg_checkpoint or [], args.frame_checkpoint or [])
    predictions = predict(parser, sentences, args.mode, args.workers)
    write_predictions(args.output, predictions)
    logger.info("Wrote %d predictions to %s", len(predictions), args.output)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    ontology = load_ontology(args.ontology) if args.ontology else None
    report = evaluate(read_predictions(args.predictions), load_corpus(args.gold, ontology), args.mode)
    print(report.to_json() if args.format == "json" else report.render_table())
    return EXIT_OK


def cmd_inspect_checkpoint(args: argparse.Namespace) -> int:
    print(json.dumps(inspect_checkpoint(args.checkpoint), indent=2, sort_keys=True))
    return EXIT_OK


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Key-value hyperparameter file (KEY=value lines).")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override one hyperparameter.")


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--train", required=True, help="Training corpus (JSONL).")
    parser.add_argument("--dev", help="Development corpus used for checkpoint selection.")
    parser.add_argument("--ontology", required=True, help="Frame ontology (JSON).")
    parser.add_argument("--embeddings", help="Pretrained word vectors (text format).")
    parser.add_argument("--output", required=True, help="Checkpoint path, or a directory with --ensemble.")
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--ensemble", action="store_true", help="Train ensemble_size members with seeds seed..seed+k-1.")
    parser.add_argument("--workers", type=int, default=1, help="Parallel processes for ensemble members.")
    _add_config_flags(parser)


def build_parser() -> CliParser:
    parser = CliParser(prog="segrnn", description="Segmental-RNN frame-semantic parser.")
    parser.add_argument("--log-level", default=None, help="Overrides SEGRNN_LOG_LEVEL.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    train_arg_parser = sub.add_parser("train-arg", help="Train the argument identification model.")
    _add_training_flags(train_arg_parser)
    train_arg_parser.add_argument("--trees", help="Bracketed trees for the syntactic scaffold.")
    train_arg_parser.set_defaults(func=cmd_train_arg)

    train_frame_parser = sub.add_parser("train-frame", help="Train the frame identification model.")
    _add_training_flags(train_frame_parser)
    train_frame_parser.set_defaults(func=cmd_train_frame)

    predict_parser = sub.add_parser("predict", help="Decode a corpus with one or more checkpoints.")
    predict_parser.add_argument("--arg-checkpoint", action="append", help="Repeat to ensemble.")
    predict_parser.add_argument("--frame-checkpoint", action="append", help="Repeat to ensemble.")
    predict_parser.add_argument("--corpus", required=True)
    predict_parser.add_argument("--ontology")
    predict_parser.add_argument("--mode", choices=MODES, default="args-gold-frames")
    predict_parser.add_argument("--output", required=True, help="Predictions file (JSONL).")
    predict_parser.add_argument("--workers", type=int, default=1)
    predict_parser.set_defaults(func=cmd_predict)

    evaluate_parser = sub.add_parser("evaluate", help="Score a predictions file against gold annotations.")
    evaluate_parser.add_argument("--predictions", required=True)
    evaluate_parser.add_argument("--gold", required=True)
    evaluate_parser.add_argument("--ontology")
    evaluate_parser.add_argument("--mode", choices=MODES, default="args-gold-frames")
    evaluate_parser.add_argument("--format", choices=("table", "json"), default="table")
    evaluate_parser.set_defaults(func=cmd_evaluate)

    inspect_parser = sub.add_parser("inspect-checkpoint", help="Print a checkpoint's metadata and tensor shapes.")
    inspect_parser.add_argument("checkpoint")
    inspect_parser.set_defaults(func=cmd_inspect_checkpoint)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except UsageError as exc:
        print(f"segrnn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    setup_logging(args.log_level or get_settings().log_level)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        logger.error("Usage error: %s", exc)
        return EXIT_USAGE
    except (DataValidationError, CheckpointError) as exc:
        logger.error("Data error: %s", exc)
        return EXIT_DATA
    except NumericError as exc:
        logger.error("Numeric failure: %s", exc)
        return EXIT_NUMERIC
    except SegRNNError as exc:
        logger.error("Failed: %s", exc)
        return EXIT_DATA
