"""Command-line entry points.

milkit run <config>                         run a benchmark config
milkit list                                 show classifiers and grids
milkit gen <spec.json> -o <dir>             generate synthetic datasets
milkit dist <bags.csv> --measure emd -o m.csv   pairwise bag distances

Exit codes: 0 success, 1 config or input error, 2 partial classifier
failures inside a run.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bags import DatasetFormatError, load_dataset
from .bench import ConfigError, parse_config, run_experiment
from .distances import MEASURES, pairwise_matrix
from .registry import list_classifiers
from .synth import GeneratorSpec, generate, generate_splits, save_instance_labels


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="milkit", description="Multiple-instance learning benchmark kit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a benchmark config")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_run.add_argument("-o", "--output-dir", help="override the config output_dir")
    p_run.add_argument(
        "--workers", type=int, help="override worker count (also: MILKIT_WORKERS)"
    )

    sub.add_parser("list", help="list classifiers and their default grids")

    p_gen = sub.add_parser("gen", help="generate synthetic MIL datasets")
    p_gen.add_argument("spec", help="path to a JSON generator spec")
    p_gen.add_argument("-o", "--output-dir", required=True)

    p_dist = sub.add_parser("dist", help="pairwise bag distance matrix")
    p_dist.add_argument("bags", help="dataset file (.csv or .jsonl)")
    p_dist.add_argument("--measure", choices=MEASURES, default="emd")
    p_dist.add_argument("-o", "--output", required=True, help="matrix CSV path")
    return parser


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.output_dir:
        cfg.output_dir = Path(args.output_dir)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("workers: must be >= 1")
        cfg.workers = args.workers
    return run_experiment(cfg)


def _cmd_gen(args) -> int:
    path = Path(args.spec)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise ConfigError("generator spec must be a JSON object")
    splits = raw.pop("splits", True)
    try:
        spec = GeneratorSpec(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"generator spec: {exc}") from exc

    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .bags import save_dataset

    if splits:
        train, val, test, truths = generate_splits(spec)
        for ds, tag in ((train, "train"), (val, "validation"), (test, "test")):
            save_dataset(ds, out / f"{tag}.csv")
            save_instance_labels(truths[tag], ds, out / f"instance_labels_{tag}.csv")
    else:
        ds, truth = generate(spec)
        save_dataset(ds, out / "bags.csv")
        save_instance_labels(truth, ds, out / "instance_labels.csv")
    print(f"wrote datasets to {out}")
    return 0


def _cmd_dist(args) -> int:
    path = Path(args.bags)
    fmt = "jsonl" if path.suffix == ".jsonl" else "csv"
    try:
        ds = load_dataset(path, format=fmt)
    except (OSError, DatasetFormatError) as exc:
        raise ConfigError(str(exc)) from exc
    matrix = pairwise_matrix(ds.bags, ds.bags, args.measure)
    out = Path(args.output)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    matrix.save_csv(out)
    print(f"wrote {matrix.values.shape[0]}x{matrix.values.shape[1]} matrix to {out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "list":
            print(list_classifiers())
            return 0
        if args.command == "gen":
            return _cmd_gen(args)
        return _cmd_dist(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
