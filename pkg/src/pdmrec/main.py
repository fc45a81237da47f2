"""Command-line entry point for pdmrec.

AIDEV-NOTE: Subcommands: preprocess, train, evaluate, ablate, synth, stats.
`--seed`, `--config`, `--data`, `--out` and `--set KEY=VALUE` are shared by
all of them. Exit codes: 0 success, 1 usage or configuration error, 2 I/O
error, 3 validation failure. Every error path logs and returns a code;
nothing below `run()` calls sys.exit.
"""

import argparse
import csv
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, NoReturn

import numpy as np
from pydantic import ValidationError

from pdmrec import __version__
from pdmrec.config import VARIANTS, TrainConfig, get_settings, load_config
from pdmrec.data.io import (
    export_index_map,
    file_sha256,
    load_split,
    read_interaction_log,
    save_split,
    write_interaction_log,
)
from pdmrec.data.models import FilterRule, SplitDataset
from pdmrec.data.pipeline import (
    build_sequences,
    dataset_statistics,
    filter_positive,
    k_core_prune,
    leave_one_out_split,
    sample_users,
)
from pdmrec.data.synthetic import SyntheticConfig, generate_synthetic
from pdmrec.errors import CheckpointError, ConfigError, PDMRecError
from pdmrec.evaluation.accounting import count_parameters
from pdmrec.evaluation.metrics import evaluate
from pdmrec.evaluation.report import EvalReport
from pdmrec.model.checkpoint import load_checkpoint
from pdmrec.model.params import ModelParams
from pdmrec.training.trainer import fit
from pdmrec.training.variants import build_spec, variant_switch

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_VALIDATION = 3


class _ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_overrides(pairs: Sequence[str]) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects KEY=VALUE, got {pair!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def _config(
    args: argparse.Namespace, base: dict[str, Any] | None = None, **extra: Any
) -> TrainConfig:
    """File values (or `base` without --config), then --set, --seed and `extra`."""
    overrides: dict[str, Any] = {}
    if base and args.config is None:
        overrides.update(base)
    overrides.update(_parse_overrides(args.set))
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "variant", None):
        overrides["variant"] = args.variant
    overrides.update(extra)
    return load_config(args.config, overrides)


def _require(value: Path | None, flag: str) -> Path:
    if value is None:
        raise ConfigError(f"{flag} is required for this command")
    return value


def _split_ks(text: str) -> list[int]:
    try:
        ks = sorted({int(part) for part in text.split(",") if part.strip()})
    except ValueError:
        raise ConfigError(f"--k expects comma-separated integers, got {text!r}")
    if not ks or ks[0] < 1:
        raise ConfigError(f"--k cutoffs must be >= 1, got {text!r}")
    return ks


# Subcommands


def cmd_preprocess(args: argparse.Namespace) -> int:
    out = _require(args.out, "--out")
    if args.rule:
        rule = FilterRule.preset(args.rule)
    else:
        rule = FilterRule(
            flag_clause=args.flags is not None,
            required_flags=frozenset(f for f in (args.flags or "").split(",") if f),
            loop_threshold=args.loop_threshold,
            watch_threshold=args.watch_threshold,
        )
    records = read_interaction_log(args.input, delimiter=args.delimiter)
    if args.sample_users < 1.0:
        seed = args.seed if args.seed is not None else 0
        records = sample_users(records, args.sample_users, seed)
    records = filter_positive(records, rule)
    if args.k_core > 1:
        records = k_core_prune(records, args.k_core)
    sequences, index_map = build_sequences(records)
    split = leave_one_out_split(sequences, index_map)

    out.parent.mkdir(parents=True, exist_ok=True)
    save_split(split, out)
    if args.index_map:
        export_index_map(split, args.index_map)
    print(f"users = {split.num_users}")
    print(f"items = {split.num_items}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    data = _require(args.data, "--data")
    out = _require(args.out, "--out")
    config = _config(args)
    dataset = load_split(data)
    result = fit(dataset, config, out_dir=out)
    print(f"best_epoch = {result.best_epoch}")
    print(f"best_val_recall50 = {result.best_recall!r}")
    print(f"epochs = {len(result.history)}")
    return EXIT_OK


def _load_model(
    args: argparse.Namespace, dataset: SplitDataset
) -> tuple[ModelParams, TrainConfig]:
    params, header = load_checkpoint(args.checkpoint)
    config = _config(args, base=header.get("config"))
    expected = build_spec(config, dataset.num_items, variant_switch(config))
    if params.spec != expected:
        raise CheckpointError(
            f"{args.checkpoint}: architecture does not match the configuration and dataset"
        )
    return params, config


def cmd_evaluate(args: argparse.Namespace) -> int:
    data = _require(args.data, "--data")
    dataset = load_split(data)
    params, config = _load_model(args, dataset)
    ks = _split_ks(args.k) if args.k else config.ks
    report = evaluate(params, dataset, args.split, config, ks=ks)
    if not args.timing:
        report = report.without_timing()

    text = report.to_text()
    if args.out is None:
        sys.stdout.write(text)
    else:
        target = args.out / "report.txt" if args.out.is_dir() else args.out
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
        logger.info("Wrote %s", target)
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    data = _require(args.data, "--data")
    out = _require(args.out, "--out")
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown or not variants:
        raise ConfigError(f"unknown variants {unknown}; expected a subset of {list(VARIANTS)}")

    dataset = load_split(data)
    digest = file_sha256(data)
    out.mkdir(parents=True, exist_ok=True)
    rows: list[tuple[str, EvalReport, int]] = []
    for variant in variants:
        config = _config(args, variant=variant)
        logger.info("Ablation run %s (seed %d)", variant, config.seed)
        result = fit(dataset, config, out_dir=out / variant)
        report = evaluate(result.params, dataset, "test", config).without_timing()
        logger.info("%s %s", variant, report.summary())
        (out / variant / "report.txt").write_text(report.to_text(), encoding="utf-8")
        rows.append((variant, report, result.best_epoch))

    ks = rows[0][1].ks
    header = ["variant", "seed", "data_sha256", "best_epoch"]
    header += [f"recall@{k}" for k in ks] + [f"ndcg@{k}" for k in ks]
    seed = _config(args).seed
    with (out / "ablation.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for variant, report, best_epoch in rows:
            writer.writerow(
                [variant, seed, digest, best_epoch]
                + [repr(report.recall[k]) for k in ks]
                + [repr(report.ndcg[k]) for k in ks]
            )

    table = [f"{'variant':<10} " + " ".join(f"{h:>10}" for h in header[4:])]
    for variant, report, _ in rows:
        values = [report.recall[k] for k in ks] + [report.ndcg[k] for k in ks]
        table.append(f"{variant:<10} " + " ".join(f"{v:>10.4f}" for v in values))
    text = "\n".join(table) + "\n"
    (out / "ablation.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)

    by_variant = {variant: report for variant, report, _ in rows}
    if "full" in by_variant and "PDMRec1" in by_variant and 20 in ks:
        gap = by_variant["full"].recall[20] - by_variant["PDMRec1"].recall[20]
        logger.info("Recall@20 gap full - PDMRec1: %+.4f", gap)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    out = _require(args.out, "--out")
    synth = SyntheticConfig(
        n_users=args.users,
        n_items=args.items,
        n_clusters=args.clusters,
        min_len=args.min_len,
        max_len=args.max_len,
        purity=args.purity,
        order=args.order,
        seed=args.seed if args.seed is not None else 0,
    )
    records = generate_synthetic(synth)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_interaction_log(records, out)
    if args.split:
        sequences, index_map = build_sequences(records)
        save_split(leave_one_out_split(sequences, index_map), args.split)
    print(f"records = {len(records)}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    data = _require(args.data, "--data")
    dataset = load_split(data)
    config = _config(args)
    stats = dataset_statistics(dataset)
    for key, value in stats.model_dump().items():
        print(f"{key} = {value!r}")

    spec = build_spec(config, dataset.num_items, variant_switch(config))
    counts = count_parameters(ModelParams.initialize(spec, np.random.default_rng(config.seed)))
    print(f"parameters.total = {counts.total}")
    print(f"parameters.item_embeddings = {counts.item_embeddings}")
    print(f"parameters.positional_embeddings = {counts.positional_embeddings}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Override the random seed")
    common.add_argument("--config", type=Path, default=None, help="key = value config file")
    common.add_argument("--data", type=Path, default=None, help="Split dataset file")
    common.add_argument("--out", type=Path, default=None, help="Output file or directory")
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override one config field (repeatable)",
    )

    parser = _ArgumentParser(
        prog="pdmrec", description="Position-decoupled sequential recommender"
    )
    parser.add_argument("--version", action="version", version=f"pdmrec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", parents=[common], help="Raw log -> split dataset")
    p.add_argument("--input", type=Path, required=True, help="Interaction log")
    p.add_argument("--delimiter", default="\t")
    p.add_argument("--rule", choices=["wechat", "tiktok1", "tiktok2"], default=None)
    p.add_argument("--flags", default=None, help="Comma-separated satisfaction flags")
    p.add_argument("--loop-threshold", type=float, default=None)
    p.add_argument("--watch-threshold", type=float, default=None)
    p.add_argument("--k-core", type=int, default=5)
    p.add_argument("--sample-users", type=float, default=1.0)
    p.add_argument("--index-map", type=Path, default=None, help="Write index<TAB>raw id")
    p.set_defaults(handler=cmd_preprocess)

    p = sub.add_parser("train", parents=[common], help="Train one model")
    p.add_argument("--variant", choices=VARIANTS, default=None)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="Score a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--split", choices=["valid", "test"], default="test")
    p.add_argument("--k", default=None, help="Comma-separated cutoffs, e.g. 20,50,100")
    p.add_argument("--timing", action="store_true", help="Include wall-clock seconds")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("ablate", parents=[common], help="Train and compare variants")
    p.add_argument("--variants", default=",".join(VARIANTS))
    p.set_defaults(handler=cmd_ablate)

    p = sub.add_parser("synth", parents=[common], help="Write a synthetic interaction log")
    p.add_argument("--users", type=int, default=200)
    p.add_argument("--items", type=int, default=100)
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--min-len", type=int, default=5)
    p.add_argument("--max-len", type=int, default=20)
    p.add_argument("--purity", type=float, default=0.9)
    p.add_argument("--order", choices=["shuffled", "cycle"], default="shuffled")
    p.add_argument("--split", type=Path, default=None, help="Also write a split dataset")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("stats", parents=[common], help="Dataset and parameter statistics")
    p.set_defaults(handler=cmd_stats)
    return parser


def configure_logging() -> None:
    settings = get_settings()
    logging.basicConfig(level=settings.log_level, format=settings.log_format)


def run(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, dispatch, and map failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE

    try:
        return int(args.handler(args))
    except PDMRecError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except ValidationError as exc:
        logger.error("Validation failed: %s", exc)
        return EXIT_VALIDATION
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO


def main() -> None:
    """Main entry point."""
    configure_logging()
    sys.exit(run())


if __name__ == "__main__":
    main()
