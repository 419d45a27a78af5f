"""Config-driven benchmark harness.

Reads a JSON experiment config, resolves datasets (generated or loaded
from files), runs every configured classifier row through the full
selection protocol, and writes a results table plus per-row artifacts.
Rows run concurrently; a failing row is isolated and marked in the
table instead of aborting the run.
"""

from __future__ import annotations

import json
import os
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bags import DatasetFormatError, MILDataset, load_dataset
from .evaluation import (
    ProtocolReport,
    delong_test,
    dependent_ttest,
    run_protocol,
    save_roc_csv,
)
from .registry import default_suite, make_trainer
from .synth import GeneratorSpec, generate_splits

WORKERS_ENV_VAR = "MILKIT_WORKERS"
TABLE_HEADER = ("Classifier", "AUC val", "AUC test", "10x AUC test")


class ConfigError(ValueError):
    """Invalid experiment config; message names the offending field."""


@dataclass
class RowSpec:
    label: str
    trainer: object
    grid: list[dict]
    seed: int
    time_budget_s: float | None = None


@dataclass
class RowResult:
    label: str
    report: ProtocolReport | None = None
    error: str | None = None
    traceback: str | None = field(default=None, repr=False)
    elapsed_s: float = 0.0

    @property
    def ok(self) -> bool:
        return self.report is not None and self.error is None


@dataclass
class ExperimentConfig:
    seed: int
    output_dir: Path
    dataset: dict
    classifiers: list[dict]
    comparisons: list[list[str]]
    workers: int | None
    alpha: float = 0.05


def _require(cond: bool, field_name: str, problem: str) -> None:
    if not cond:
        raise ConfigError(f"{field_name}: {problem}")


def parse_config(path) -> ExperimentConfig:
    """Load and validate a config file; errors carry field diagnostics."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    _require(isinstance(raw, dict), "config", "top level must be a JSON object")

    known = {
        "seed",
        "output_dir",
        "dataset",
        "classifiers",
        "comparisons",
        "workers",
        "alpha",
    }
    for key in raw:
        _require(key in known, key, "unknown config field")

    seed = raw.get("seed", 0)
    _require(isinstance(seed, int), "seed", "must be an integer")
    out_dir = raw.get("output_dir", "milkit-out")
    _require(isinstance(out_dir, str) and out_dir, "output_dir", "must be a path")

    dataset = raw.get("dataset")
    _require(isinstance(dataset, dict), "dataset", "must be an object")
    _require(
        ("generator" in dataset) != ("files" in dataset),
        "dataset",
        "needs exactly one of 'generator' or 'files'",
    )
    if "files" in dataset:
        files = dataset["files"]
        _require(isinstance(files, dict), "dataset.files", "must be an object")
        for split in ("train", "validation", "test"):
            _require(
                isinstance(files.get(split), str),
                f"dataset.files.{split}",
                "missing path",
            )

    classifiers = raw.get("classifiers", "default")
    if classifiers == "default":
        classifiers = default_suite()
    _require(
        isinstance(classifiers, list) and classifiers,
        "classifiers",
        "must be a nonempty list or the string 'default'",
    )
    entries = []
    for i, entry in enumerate(classifiers):
        if isinstance(entry, str):
            entry = {"name": entry}
        _require(isinstance(entry, dict), f"classifiers[{i}]", "must be a name or object")
        _require(isinstance(entry.get("name"), str), f"classifiers[{i}].name", "missing")
        if "grid" in entry:
            _require(
                isinstance(entry["grid"], list) and entry["grid"],
                f"classifiers[{i}].grid",
                "must be a nonempty list of hyperparameter objects",
            )
        entries.append(entry)

    comparisons = raw.get("comparisons", [])
    _require(isinstance(comparisons, list), "comparisons", "must be a list of pairs")
    for i, pair in enumerate(comparisons):
        _require(
            isinstance(pair, list) and len(pair) == 2,
            f"comparisons[{i}]",
            "must be a pair of row labels",
        )

    workers = raw.get("workers")
    if workers is not None:
        _require(
            isinstance(workers, int) and workers >= 1, "workers", "must be >= 1"
        )
    alpha = raw.get("alpha", 0.05)
    _require(
        isinstance(alpha, (int, float)) and 0.0 < alpha < 1.0,
        "alpha",
        "must be in (0, 1)",
    )

    return ExperimentConfig(
        seed=seed,
        output_dir=Path(out_dir),
        dataset=dataset,
        classifiers=entries,
        comparisons=comparisons,
        workers=workers,
        alpha=float(alpha),
    )


def build_rows(cfg: ExperimentConfig) -> list[RowSpec]:
    """Expand config entries into concrete rows with derived seeds."""
    rows = []
    labels = set()
    for entry in cfg.classifiers:
        family = entry["name"]
        try:
            if "rule" in entry:
                expanded = [make_trainer(family, entry["rule"])]
            else:
                try:
                    expanded = [make_trainer(family)]
                except ValueError:
                    # families with a rule choice default to one row per rule
                    expanded = [
                        make_trainer(family, rule) for rule in ("noisy_or", "average")
                    ]
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"classifiers.{family}: {exc}") from exc

        budget = entry.get("time_budget_s")
        if family == "emdd" and budget is None:
            raise ConfigError(
                "classifiers.emdd: opt-in method, set time_budget_s to run it"
            )
        for trainer, grid, label in expanded:
            if "label" in entry:
                label = entry["label"] if len(expanded) == 1 else f"{entry['label']} {label}"
            if label in labels:
                raise ConfigError(f"classifiers: duplicate row label {label!r}")
            labels.add(label)
            row_grid = list(entry.get("grid", grid))
            rows.append(
                RowSpec(
                    label=label,
                    trainer=trainer,
                    grid=row_grid,
                    seed=0,  # assigned below in declared order
                    time_budget_s=budget,
                )
            )
    for idx, row in enumerate(rows):
        row.seed = int(np.random.SeedSequence([cfg.seed, idx]).generate_state(1)[0])
    for pair in cfg.comparisons:
        for label in pair:
            if label not in labels:
                raise ConfigError(
                    f"comparisons: unknown row label {label!r}; rows: {sorted(labels)}"
                )
    return rows


def resolve_datasets(cfg: ExperimentConfig):
    """Produce (train, validation, test) from the dataset section."""
    if "generator" in cfg.dataset:
        gen = dict(cfg.dataset["generator"])
        gen.setdefault("seed", cfg.seed)
        try:
            spec = GeneratorSpec(**gen)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"dataset.generator: {exc}") from exc
        train, val, test, _ = generate_splits(spec)
        return train, val, test
    files = cfg.dataset["files"]
    out = []
    for split in ("train", "validation", "test"):
        p = Path(files[split])
        fmt = "jsonl" if p.suffix == ".jsonl" else "csv"
        try:
            out.append(load_dataset(p, format=fmt, split_tag=split))
        except (OSError, DatasetFormatError) as exc:
            raise ConfigError(f"dataset.files.{split}: {exc}") from exc
    return tuple(out)


def worker_count(cfg: ExperimentConfig) -> int:
    if cfg.workers is not None:
        return cfg.workers
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV_VAR}: not an integer: {env!r}") from exc
        if n >= 1:
            return n
        raise ConfigError(f"{WORKERS_ENV_VAR}: must be >= 1")
    return 1


def _run_row(row: RowSpec, train, val, test) -> RowResult:
    t0 = time.perf_counter()
    try:
        report = run_protocol(
            train, val, test, row.label, row.trainer, row.grid, seed=row.seed
        )
    except Exception as exc:  # isolate the failure to this row
        return RowResult(
            label=row.label,
            error=f"{type(exc).__name__}: {exc}",
            traceback=traceback.format_exc(),
            elapsed_s=time.perf_counter() - t0,
        )
    elapsed = time.perf_counter() - t0
    if row.time_budget_s is not None and elapsed > row.time_budget_s:
        return RowResult(
            label=row.label,
            error=f"time budget exceeded: {elapsed:.1f}s > {row.time_budget_s:.1f}s",
            elapsed_s=elapsed,
        )
    return RowResult(label=row.label, report=report, elapsed_s=elapsed)


def _flags_for_column(results, value_fn, compare_fn, alpha) -> dict[str, bool]:
    """Mark rows not significantly worse than the column's best row."""
    ok_rows = [r for r in results if r.ok]
    if not ok_rows:
        return {}
    best = max(ok_rows, key=value_fn)  # first row wins ties
    flags = {}
    for r in ok_rows:
        if r is best:
            flags[r.label] = True
            continue
        try:
            sig = compare_fn(r, best)
            flags[r.label] = sig.p_value >= alpha
        except ValueError:
            flags[r.label] = False
    return flags


def significance_flags(results: list[RowResult], alpha: float):
    """Per-column 'among best' flags: DeLong on val/test, t-test on repeats."""
    val = _flags_for_column(
        results,
        lambda r: r.report.auc_val,
        lambda r, b: delong_test(
            r.report.val_scores, b.report.val_scores, r.report.val_labels, alpha
        ),
        alpha,
    )
    test = _flags_for_column(
        results,
        lambda r: r.report.auc_test,
        lambda r, b: delong_test(
            r.report.test_scores, b.report.test_scores, r.report.test_labels, alpha
        ),
        alpha,
    )
    sub = _flags_for_column(
        results,
        lambda r: r.report.subsample_mean,
        lambda r, b: dependent_ttest(
            r.report.subsample_aucs, b.report.subsample_aucs, alpha
        ),
        alpha,
    )
    return val, test, sub


def format_table(results: list[RowResult], alpha: float) -> str:
    """Fixed-layout results table; AUC x100 with one decimal.

    A '*' marks rows not significantly worse than the column's best.
    """
    val_f, test_f, sub_f = significance_flags(results, alpha)
    width = max([len(TABLE_HEADER[0])] + [len(r.label) for r in results]) + 2

    def cell(flagged: bool, text: str) -> str:
        return ("*" if flagged else " ") + text

    lines = [
        f"{TABLE_HEADER[0]:<{width}}{TABLE_HEADER[1]:>9}{TABLE_HEADER[2]:>10}"
        f"  {TABLE_HEADER[3]}",
        "-" * (width + 9 + 10 + 2 + len(TABLE_HEADER[3])),
    ]
    for r in results:
        if not r.ok:
            lines.append(f"{r.label:<{width}}ERROR: {r.error}")
            continue
        rep = r.report
        v = cell(val_f.get(r.label, False), f"{100 * rep.auc_val:5.1f}")
        t = cell(test_f.get(r.label, False), f"{100 * rep.auc_test:5.1f}")
        s = cell(
            sub_f.get(r.label, False),
            f"{100 * rep.subsample_mean:5.1f} ({100 * rep.subsample_std:4.1f})",
        )
        lines.append(f"{r.label:<{width}}{v:>9}{t:>10}  {s}")
    return "\n".join(lines) + "\n"


def _slug(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "-" for ch in label)


def _sig_payload(sig) -> dict:
    return {
        "test": sig.test,
        "statistic": sig.statistic if np.isfinite(sig.statistic) else str(sig.statistic),
        "p_value": sig.p_value,
        "alpha": sig.alpha,
        "degenerate": sig.degenerate,
        "significant": sig.significant,
    }


def write_artifacts(cfg: ExperimentConfig, results: list[RowResult], table: str) -> None:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.txt").write_text(table)

    for r in results:
        slug = _slug(r.label)
        if not r.ok:
            (out / f"error_{slug}.txt").write_text(
                f"{r.error}\n\n{r.traceback or ''}"
            )
            continue
        (out / f"report_{slug}.json").write_text(r.report.to_json() + "\n")
        save_roc_csv(r.report.roc_val(), out / f"roc_{slug}_val.csv")
        save_roc_csv(r.report.roc_test(), out / f"roc_{slug}_test.csv")

    by_label = {r.label: r for r in results}
    comparisons = []
    for a_label, b_label in cfg.comparisons:
        a, b = by_label[a_label], by_label[b_label]
        entry = {"pair": [a_label, b_label]}
        if not (a.ok and b.ok):
            entry["error"] = "one or both rows failed"
        else:
            entry["delong_val"] = _sig_payload(
                delong_test(
                    a.report.val_scores,
                    b.report.val_scores,
                    a.report.val_labels,
                    cfg.alpha,
                )
            )
            entry["delong_test"] = _sig_payload(
                delong_test(
                    a.report.test_scores,
                    b.report.test_scores,
                    a.report.test_labels,
                    cfg.alpha,
                )
            )
            entry["ttest_subsample"] = _sig_payload(
                dependent_ttest(
                    a.report.subsample_aucs, b.report.subsample_aucs, cfg.alpha
                )
            )
        comparisons.append(entry)
    if comparisons:
        (out / "comparisons.json").write_text(
            json.dumps(comparisons, indent=2, sort_keys=False) + "\n"
        )


def run_experiment(cfg: ExperimentConfig, echo=print) -> int:
    """Run all rows; returns 0 on success, 2 if any row failed."""
    rows = build_rows(cfg)
    train, val, test = resolve_datasets(cfg)
    n_workers = worker_count(cfg)

    if n_workers == 1:
        results = [_run_row(row, train, val, test) for row in rows]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_run_row, row, train, val, test) for row in rows]
            results = [f.result() for f in futures]  # declared row order

    table = format_table(results, cfg.alpha)
    write_artifacts(cfg, results, table)
    echo(table, end="")
    return 2 if any(not r.ok for r in results) else 0
