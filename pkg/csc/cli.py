"""``csc`` command line: synth, train, eval, verify-claims, attn-dump."""

from __future__ import annotations

import argparse
import sys
import uuid
from pathlib import Path
from typing import Sequence

from pydantic import ValidationError

from common.logging import configure_structured_logging, get_logger, run_scope
from csc.baselines import parse_variants, run_ablation, write_ablation_csv
from csc.config import RunConfig, load_run_config, write_effective_config
from csc.evaluation.attention import attention_trace, write_attention_csv
from csc.evaluation.trials import evaluate, write_trials
from csc.exceptions import (
    CheckpointError,
    ConfigurationError,
    RefusedOverwriteError,
    SeparativeCodingError,
)
from csc.persistence import latest_checkpoint, load_checkpoint
from csc.plots import attention_svg, roc_svg
from csc.simulation.corpus import Corpus, build_corpus, load_corpus, write_corpus
from csc.training.metrics_sink import JsonlMetricsSink
from csc.training.state import TrainingState
from csc.training.trainer import train
from csc.verification.claims import run_claim_suite

logger = get_logger("csc.cli")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_REFUSED = 3


def _output_root(args: argparse.Namespace, config: RunConfig) -> Path:
    return Path(args.out) if args.out else Path(config.eval.output_dir)


def _load_config(args: argparse.Namespace) -> RunConfig:
    return load_run_config(args.config, overrides=args.set or ())


def _require_corpus(root: Path) -> Corpus:
    return load_corpus(root / "corpus")


def _load_state(args: argparse.Namespace, root: Path) -> TrainingState:
    if args.checkpoint:
        return load_checkpoint(args.checkpoint)
    latest = latest_checkpoint(root / "train" / "checkpoints")
    if latest is None:
        raise CheckpointError(f"no checkpoint under {root / 'train' / 'checkpoints'}")
    return load_checkpoint(latest)


def cmd_synth(args: argparse.Namespace) -> int:
    config = _load_config(args)
    root = _output_root(args, config)
    corpus = build_corpus(config.corpus)
    manifest_path = write_corpus(corpus, root / "corpus", force=args.force)
    write_effective_config(config, root / "corpus")
    print(manifest_path)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args)
    root = _output_root(args, config)
    corpus = _require_corpus(root)
    if args.ablate:
        rows = run_ablation(config, parse_variants(args.ablate), corpus, root / "ablation")
        write_ablation_csv(rows, sys.stdout)
        return EXIT_OK

    train_dir = root / "train"
    write_effective_config(config, train_dir)
    state = train(
        config,
        corpus,
        JsonlMetricsSink(train_dir),
        checkpoint_root=train_dir / "checkpoints",
        resume=args.resume,
    )
    print(train_dir / "checkpoints" / f"epoch_{state.epoch:04d}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args)
    root = _output_root(args, config)
    corpus = _require_corpus(root)
    state = _load_state(args, root)
    eval_config = config.eval
    if args.condition:
        eval_config = eval_config.model_copy(update={"condition": args.condition})
    trial_set, curve, summary = evaluate(corpus, state.model, state.bank.aggregator, eval_config)
    eval_dir = root / "eval"
    write_trials(trial_set, curve, summary, eval_dir)
    roc_svg(curve, summary.eer, eval_dir / "roc.svg", label=f"ROC ({summary.condition})")
    write_effective_config(config, eval_dir)
    print(summary.model_dump_json())
    return EXIT_OK


def cmd_verify_claims(args: argparse.Namespace) -> int:
    report = run_claim_suite(seed=args.seed, perturb=args.perturb)
    payload = report.model_dump_json(indent=2)
    if args.out:
        target = Path(args.out)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(payload + "\n", encoding="utf-8")
    print(payload)
    return EXIT_OK if report.passed else EXIT_FAILURE


def cmd_attn_dump(args: argparse.Namespace) -> int:
    config = _load_config(args)
    root = _output_root(args, config)
    corpus = _require_corpus(root)
    state = _load_state(args, root)
    records = {record.example_id: record for record in corpus.manifest.examples}
    example_id = args.example or corpus.records("test")[0].example_id
    if example_id not in records:
        raise ConfigurationError(f"unknown mixture id {example_id!r}")
    trace = attention_trace(state.model, corpus.example(records[example_id]))
    attention_dir = root / "attention"
    csv_path = write_attention_csv(trace, attention_dir / f"{example_id}.csv")
    attention_svg(trace, attention_dir / f"{example_id}.svg")
    print(csv_path)
    return EXIT_OK


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument(
        "--set",
        action="append",
        metavar="SECTION.KEY=VALUE",
        help="override one configuration value; may be repeated",
    )
    parser.add_argument("--out", help="output root (defaults to eval.output_dir)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csc", description="Contrastive separative coding on synthetic mixtures.")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate the synthetic corpus")
    _add_config_flags(synth)
    synth.add_argument("--force", action="store_true", help="overwrite an existing corpus")
    synth.set_defaults(handler=cmd_synth)

    train_cmd = commands.add_parser("train", help="train on the corpus, checkpointing every epoch")
    _add_config_flags(train_cmd)
    train_cmd.add_argument("--resume", action="store_true", help="continue from the newest checkpoint")
    train_cmd.add_argument("--ablate", metavar="VARIANTS", help="comma-separated subset of csc,infonce,meanpool")
    train_cmd.set_defaults(handler=cmd_train)

    eval_cmd = commands.add_parser("eval", help="score verification trials on unseen speakers")
    _add_config_flags(eval_cmd)
    eval_cmd.add_argument("--checkpoint", help="checkpoint directory (defaults to the newest)")
    eval_cmd.add_argument("--condition", choices=("mix", "clean"))
    eval_cmd.set_defaults(handler=cmd_eval)

    verify = commands.add_parser("verify-claims", help="run the mathematical oracle suite")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--perturb", type=float, default=0.0, help="relative fault injected into one identity")
    verify.add_argument("--out", help="also write the JSON report to this file")
    verify.set_defaults(handler=cmd_verify_claims)

    attn = commands.add_parser("attn-dump", help="dump attention curves of one mixture")
    _add_config_flags(attn)
    attn.add_argument("--checkpoint", help="checkpoint directory (defaults to the newest)")
    attn.add_argument("--example", help="mixture id (defaults to the first test mixture)")
    attn.set_defaults(handler=cmd_attn_dump)
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    try:
        return int(args.handler(args))
    except RefusedOverwriteError as exc:
        code, message = EXIT_REFUSED, str(exc)
    except (ConfigurationError, CheckpointError) as exc:
        code, message = EXIT_CONFIG, str(exc)
    except ValidationError as exc:
        code, message = EXIT_CONFIG, f"invalid data: {exc}"
    except SeparativeCodingError as exc:
        code, message = EXIT_FAILURE, str(exc)
    logger.error(
        "command failed",
        extra={"event": "csc.cli.failed", "context": {"command": args.command, "exit_code": code}},
    )
    print(f"csc {args.command}: {message}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    configure_structured_logging("csc")
    args = build_parser().parse_args(argv)
    with run_scope(f"{args.command}-{uuid.uuid4().hex[:12]}"):
        return _dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
