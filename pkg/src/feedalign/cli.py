"""Command-line entry point.

Three subcommands:

    feedalign data verify --manifest checksums.json [--data-dir DIR]
    feedalign train --dataset NAME --out DIR [overrides...]
    feedalign analyze KIND --artifacts DIR [flags...]

Training configuration resolves in three layers: command-line flags beat
the JSON config file given with --config, which beats the built-in
defaults (60 epochs, learning rate 1e-4, batch 64, weight decay 1e-5,
seeds 1..10, every algorithm). The fully-resolved configuration is printed
as one JSON line so a run can be reproduced from its log alone.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .analysis import (
    accuracy_table,
    cross_algorithm_table,
    layer_similarity_table,
    stability_table,
    write_accuracy_json,
    write_grid_csv,
    write_similarity_csv,
    write_similarity_json,
    write_stability_json,
)
from .datasets import (
    Dataset,
    Split,
    SyntheticSpec,
    load_cifar10,
    load_mnist,
    make_synthetic,
    verify_checksums,
)
from .experiment import RunArtifact, SuiteResults, run_suite
from .figures import accuracy_bars, similarity_heatmap, stability_bars
from .trainers import Algorithm, OptimizerKind, TrainConfig

__all__ = ["main", "parse_seeds", "parse_algorithms"]

DATA_DIR_ENV = "FEEDALIGN_DATA_DIR"

DATASET_NAMES = ("synthetic", "mnist", "cifar10")

TRAIN_DEFAULTS: dict[str, object] = {
    "dataset": None,
    "data_dir": None,
    "out": None,
    "algos": "all",
    "seeds": "1..10",
    "epochs": 60,
    "learning_rate": 1e-4,
    "batch_size": 64,
    "weight_decay": 1e-5,
    "optimizer": "none",
    "threads": 1,
    "train_limit": None,
    "synthetic_train": 512,
    "synthetic_test": 256,
    "synthetic_dim": 16,
    "synthetic_classes": 4,
    "synthetic_data_seed": 1234,
}


def parse_seeds(text: str) -> list[int]:
    """Seed lists like "1..10", "1,2,5", or "1..3,7"."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            raise ValueError(f"empty entry in seed list {text!r}")
        if ".." in part:
            lo_text, _, hi_text = part.partition("..")
            lo, hi = int(lo_text), int(hi_text)
            if lo > hi:
                raise ValueError(f"seed range {part!r} is descending")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if any(s < 0 for s in seeds):
        raise ValueError(f"negative seed in {text!r}")
    if len(set(seeds)) != len(seeds):
        raise ValueError(f"duplicate seeds in {text!r}")
    return seeds


def parse_algorithms(text: str) -> list[Algorithm]:
    """Algorithm lists like "bp,dfa" or the shorthand "all"."""
    if text.strip().lower() == "all":
        return list(Algorithm)
    algos = [Algorithm.from_token(part) for part in text.split(",")]
    if len(set(algos)) != len(algos):
        raise ValueError(f"duplicate algorithms in {text!r}")
    return algos


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedalign",
        description="Train MLPs with interchangeable backward passes and compare the results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    data = sub.add_parser("data", help="dataset file utilities")
    data_sub = data.add_subparsers(dest="data_command", required=True)
    verify = data_sub.add_parser("verify", help="check dataset files against sha256 digests")
    verify.add_argument("--manifest", required=True, help="JSON file mapping relative path to sha256")
    verify.add_argument("--data-dir", default=None, help=f"dataset root (default ${DATA_DIR_ENV})")

    train = sub.add_parser("train", help="run a training suite and store artifacts")
    train.add_argument("--config", default=None, help="JSON file with defaults for any flag below")
    train.add_argument("--dataset", default=None, choices=DATASET_NAMES)
    train.add_argument("--data-dir", dest="data_dir", default=None)
    train.add_argument("--out", default=None, help="artifact directory (required)")
    train.add_argument("--algos", default=None, help='comma list of bp,fa,usfa,dfa,wdfa or "all"')
    train.add_argument("--seeds", default=None, help='e.g. "1..10" or "1,2,5"')
    train.add_argument("--epochs", type=int, default=None)
    train.add_argument("--lr", dest="learning_rate", type=float, default=None)
    train.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    train.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    train.add_argument("--optimizer", default=None, choices=[k.value for k in OptimizerKind])
    train.add_argument("--threads", type=int, default=None, help="parallel runs (never affects numerics)")
    train.add_argument("--train-limit", dest="train_limit", type=int, default=None,
                       help="use only the first N training samples")
    train.add_argument("--synthetic-train", dest="synthetic_train", type=int, default=None)
    train.add_argument("--synthetic-test", dest="synthetic_test", type=int, default=None)
    train.add_argument("--synthetic-dim", dest="synthetic_dim", type=int, default=None)
    train.add_argument("--synthetic-classes", dest="synthetic_classes", type=int, default=None)
    train.add_argument("--synthetic-data-seed", dest="synthetic_data_seed", type=int, default=None)

    analyze = sub.add_parser("analyze", help="compute report tables from stored artifacts")
    analyze.add_argument("kind", choices=["accuracy", "stability", "cross", "layers"])
    analyze.add_argument("--artifacts", required=True, help="directory written by `train --out`")
    analyze.add_argument("--dataset", default=None, help="restrict to one dataset (default: all found)")
    analyze.add_argument("--layer", type=int, default=None, help="layer index for `layers`")
    analyze.add_argument("--all-layers", action="store_true", help="emit every layer's table")
    analyze.add_argument("--seed-matched", action="store_true",
                         help="average only same-seed pairs in `cross`")
    analyze.add_argument("--report-dir", default=None,
                         help="where to write reports (default <artifacts>/reports)")
    return parser


def _resolve_train_settings(parser: argparse.ArgumentParser, args: argparse.Namespace) -> dict:
    """Merge flags over the config file over the defaults."""
    from_file: dict[str, object] = {}
    if args.config is not None:
        try:
            from_file = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            parser.error(f"config file not found: {args.config}")
        except json.JSONDecodeError as exc:
            parser.error(f"config file {args.config} is not valid JSON: {exc}")
        if not isinstance(from_file, dict):
            parser.error(f"config file {args.config} must hold a JSON object")
        unknown = sorted(set(from_file) - set(TRAIN_DEFAULTS))
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")

    resolved = {}
    for key, default in TRAIN_DEFAULTS.items():
        flag_value = getattr(args, key)
        if flag_value is not None:
            resolved[key] = flag_value
        elif key in from_file:
            resolved[key] = from_file[key]
        else:
            resolved[key] = default
    return resolved


def _load_splits(settings: dict) -> tuple[Dataset, Dataset]:
    name = settings["dataset"]
    if name == "synthetic":
        spec = SyntheticSpec(
            n_train=settings["synthetic_train"],
            n_test=settings["synthetic_test"],
            input_dim=settings["synthetic_dim"],
            n_classes=settings["synthetic_classes"],
            seed=settings["synthetic_data_seed"],
        )
        return make_synthetic(spec)
    data_dir = settings["data_dir"]
    loader = load_mnist if name == "mnist" else load_cifar10
    return loader(data_dir, Split.TRAIN), loader(data_dir, Split.TEST)


def _cmd_train(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    settings = _resolve_train_settings(parser, args)
    if settings["dataset"] is None:
        parser.error("train needs --dataset (or a config file setting it)")
    if settings["dataset"] not in DATASET_NAMES:
        parser.error(f"unknown dataset {settings['dataset']!r} (choose from {', '.join(DATASET_NAMES)})")
    if settings["out"] is None:
        parser.error("train needs --out (or a config file setting it)")
    if settings["data_dir"] is None:
        settings["data_dir"] = os.environ.get(DATA_DIR_ENV)
    if settings["dataset"] != "synthetic" and settings["data_dir"] is None:
        parser.error(f"--data-dir (or ${DATA_DIR_ENV}) is required for {settings['dataset']}")

    try:
        algorithms = parse_algorithms(str(settings["algos"]))
        seeds = parse_seeds(str(settings["seeds"]))
    except ValueError as exc:
        parser.error(str(exc))
    if not isinstance(settings["threads"], int) or settings["threads"] < 1:
        parser.error(f"--threads must be a positive integer, got {settings['threads']}")
    try:
        base_config = TrainConfig(
            algorithm=algorithms[0],
            seed=seeds[0],
            learning_rate=float(settings["learning_rate"]),
            epochs=int(settings["epochs"]),
            batch_size=int(settings["batch_size"]),
            weight_decay=float(settings["weight_decay"]),
            optimizer=OptimizerKind(settings["optimizer"]),
        )
    except ValueError as exc:
        parser.error(str(exc))

    settings["algos"] = [a.value for a in algorithms]
    settings["seeds"] = seeds
    print("config " + json.dumps(settings, sort_keys=True), flush=True)

    train_split, test_split = _load_splits(settings)
    if settings["train_limit"] is not None:
        train_split = train_split.subset(int(settings["train_limit"]))

    out_dir = Path(settings["out"])
    dataset_name = settings["dataset"]

    def report(artifact: RunArtifact) -> None:
        print(
            f"run {dataset_name}/{artifact.algorithm.value}/seed_{artifact.seed}: "
            f"test_accuracy={artifact.test_accuracy:.4f}",
            flush=True,
        )

    results = run_suite(
        dataset_name,
        train_split,
        test_split,
        base_config,
        algorithms,
        seeds,
        out_dir=out_dir,
        threads=settings["threads"],
        on_complete=report,
    )

    runs = [
        {
            "algorithm": algo.value,
            "seed": seed,
            "test_accuracy": results[(algo, seed)].test_accuracy,
            "dir": f"{dataset_name}/{algo.value}/seed_{seed}",
        }
        for algo in algorithms
        for seed in seeds
    ]
    # Paths are machine-specific; keeping them out of the summary makes two
    # runs of the same configuration byte-identical wherever they land.
    stored = {k: v for k, v in settings.items() if k not in ("out", "data_dir")}
    summary = {"dataset": dataset_name, "config": stored, "runs": runs}
    (out_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(runs)} runs under {out_dir}", flush=True)
    return 0


def _cmd_data_verify(args: argparse.Namespace) -> int:
    data_dir = args.data_dir or os.environ.get(DATA_DIR_ENV) or "."
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    if not isinstance(manifest, dict):
        raise ValueError(f"{args.manifest} must hold a JSON object of path: sha256")
    if not manifest:
        print("warning: manifest lists no files", flush=True)
        return 0
    problems = verify_checksums(manifest, data_dir)
    for problem in problems:
        print(f"FAIL {problem}", flush=True)
    if problems:
        return 1
    print(f"ok: {len(manifest)} files verified", flush=True)
    return 0


def _discover_datasets(artifact_dir: Path) -> list[str]:
    names = []
    for child in sorted(artifact_dir.iterdir()):
        if child.is_dir() and any(child.glob("*/seed_*/manifest.json")):
            names.append(child.name)
    return names


def _cmd_analyze(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    artifact_dir = Path(args.artifacts)
    if args.kind == "layers" and args.layer is None and not args.all_layers:
        parser.error("analyze layers needs --layer <index> or --all-layers")
    if not artifact_dir.is_dir():
        raise FileNotFoundError(f"no artifact directory at {artifact_dir}")
    dataset_names = [args.dataset] if args.dataset else _discover_datasets(artifact_dir)
    if not dataset_names:
        raise FileNotFoundError(
            f"no stored runs under {artifact_dir} "
            f"(expected <dataset>/<algorithm>/seed_<n>/manifest.json)"
        )
    suites = [SuiteResults.load(artifact_dir, name) for name in dataset_names]
    artifacts = [art for suite in suites for art in suite.runs.values()]

    report_dir = Path(args.report_dir) if args.report_dir else artifact_dir / "reports"
    report_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit_similarity(report, stem: str) -> None:
        write_similarity_csv(report, report_dir / f"{stem}.csv")
        write_similarity_json(report, report_dir / f"{stem}.json")
        similarity_heatmap(report, report_dir / f"{stem}.png")
        written.extend(report_dir / f"{stem}{ext}" for ext in (".csv", ".json", ".png"))

    if args.kind == "accuracy":
        report = accuracy_table(artifacts)
        write_grid_csv(report.algorithms, report.datasets, report.mean, report_dir / "accuracy.csv")
        write_accuracy_json(report, report_dir / "accuracy.json")
        accuracy_bars(report, report_dir / "accuracy.png")
        written.extend(report_dir / f"accuracy{ext}" for ext in (".csv", ".json", ".png"))
    elif args.kind == "stability":
        report = stability_table(artifacts)
        write_grid_csv(report.algorithms, report.datasets, report.values, report_dir / "stability.csv")
        write_stability_json(report, report_dir / "stability.json")
        stability_bars(report, report_dir / "stability.png")
        written.extend(report_dir / f"stability{ext}" for ext in (".csv", ".json", ".png"))
    elif args.kind == "cross":
        suffix = "_seed_matched" if args.seed_matched else ""
        for suite in suites:
            report = cross_algorithm_table(
                artifacts, suite.dataset_name, seed_matched=args.seed_matched
            )
            emit_similarity(report, f"cross_{suite.dataset_name}{suffix}")
    else:
        for suite in suites:
            any_run = next(iter(suite.runs.values()))
            n_layers = any_run.final_state.n_layers
            layers = range(n_layers) if args.all_layers else [args.layer]
            for layer in layers:
                report = layer_similarity_table(artifacts, suite.dataset_name, layer)
                emit_similarity(report, f"layers_{suite.dataset_name}_layer{layer}")

    for path in written:
        print(f"wrote {path}", flush=True)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "data":
            return _cmd_data_verify(args)
        if args.command == "train":
            return _cmd_train(parser, args)
        return _cmd_analyze(parser, args)
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr, flush=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
