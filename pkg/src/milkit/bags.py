"""Core data model: bags of instances, labeled datasets, serialization.

A bag is an ordered collection of d-dimensional feature vectors (its
instances) plus an optional binary label in {+1, -1}.  Datasets are
immutable after construction and safe to share across workers.

File formats
------------
CSV: one row per instance, ``bag_id,label,f1,...,fd``, header required.
Rows of one bag must be contiguous; the label column may be empty for
unlabeled bags.  Floats are written with 17 significant digits so that
save -> load round-trips exactly.

JSONL: one object per bag, ``{"id": ..., "label": ..., "instances": [[...], ...]}``
with ``label`` null for unlabeled bags.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

POSITIVE = 1
NEGATIVE = -1


class DatasetFormatError(ValueError):
    """Malformed dataset file; message carries the offending line number."""


@dataclass(frozen=True, eq=False)
class Bag:
    """A nonempty set of instances with one optional {+1,-1} label.

    ``instances`` is an (n_i, d) float array, made read-only on
    construction.
    """

    id: str
    instances: np.ndarray
    label: int | None = None

    def __post_init__(self):
        inst = np.asarray(self.instances, dtype=float)
        if inst.ndim != 2 or inst.shape[0] < 1 or inst.shape[1] < 1:
            raise ValueError(f"bag {self.id!r}: instances must be a nonempty 2-D array")
        if not np.all(np.isfinite(inst)):
            raise ValueError(f"bag {self.id!r}: non-finite feature value")
        if self.label not in (POSITIVE, NEGATIVE, None):
            raise ValueError(f"bag {self.id!r}: label must be +1, -1 or None")
        inst.setflags(write=False)
        object.__setattr__(self, "instances", inst)

    @property
    def n_instances(self) -> int:
        return self.instances.shape[0]

    @property
    def dim(self) -> int:
        return self.instances.shape[1]


@dataclass(frozen=True, eq=False)
class MILDataset:
    """A set of bags sharing one feature dimension, with a split tag."""

    bags: tuple[Bag, ...]
    dim: int
    split_tag: str = "unsplit"

    _SPLIT_TAGS = ("train", "train_sub", "validation", "test", "unsplit")

    def __post_init__(self):
        object.__setattr__(self, "bags", tuple(self.bags))
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.split_tag not in self._SPLIT_TAGS:
            raise ValueError(f"unknown split_tag {self.split_tag!r}")
        seen: set[str] = set()
        for bag in self.bags:
            if bag.dim != self.dim:
                raise ValueError(
                    f"bag {bag.id!r} has dimension {bag.dim}, dataset has {self.dim}"
                )
            if bag.id in seen:
                raise ValueError(f"duplicate bag id {bag.id!r}")
            seen.add(bag.id)

    @classmethod
    def from_bags(cls, bags, split_tag: str = "unsplit") -> "MILDataset":
        bags = tuple(bags)
        if not bags:
            raise ValueError("cannot infer dimension from an empty bag list")
        return cls(bags=bags, dim=bags[0].dim, split_tag=split_tag)

    def __len__(self) -> int:
        return len(self.bags)

    def __iter__(self):
        return iter(self.bags)

    def labels(self) -> np.ndarray:
        """Bag labels as an int array; raises if any bag is unlabeled."""
        out = np.empty(len(self.bags), dtype=int)
        for i, bag in enumerate(self.bags):
            if bag.label is None:
                raise ValueError(f"bag {bag.id!r} is unlabeled")
            out[i] = bag.label
        return out

    def bag_ids(self) -> list[str]:
        return [bag.id for bag in self.bags]

    def stacked_instances(self) -> tuple[np.ndarray, np.ndarray]:
        """All instances as one (N, d) array plus the owning bag index per row."""
        X = np.concatenate([bag.instances for bag in self.bags], axis=0)
        idx = np.concatenate(
            [np.full(bag.n_instances, i) for i, bag in enumerate(self.bags)]
        )
        return X, idx

    def with_split_tag(self, split_tag: str) -> "MILDataset":
        return MILDataset(bags=self.bags, dim=self.dim, split_tag=split_tag)


def datasets_equal(a: MILDataset, b: MILDataset) -> bool:
    """Structural equality: same dims, ids, labels, and exact feature values."""
    if a.dim != b.dim or len(a.bags) != len(b.bags):
        return False
    for ba, bb in zip(a.bags, b.bags):
        if ba.id != bb.id or ba.label != bb.label:
            return False
        if ba.instances.shape != bb.instances.shape:
            return False
        if not np.array_equal(ba.instances, bb.instances):
            return False
    return True


def _format_float(x: float) -> str:
    # 17 significant digits: lossless for IEEE doubles.
    return format(float(x), ".17g")


def _parse_label(text: str, path, line_no: int) -> int | None:
    text = text.strip()
    if text == "":
        return None
    if text in ("1", "+1"):
        return POSITIVE
    if text == "-1":
        return NEGATIVE
    raise DatasetFormatError(f"{path}:{line_no}: label must be 1, -1 or empty, got {text!r}")


def _finish_bag(bag_id, label, rows, path, first_line) -> Bag:
    try:
        return Bag(id=bag_id, instances=np.array(rows, dtype=float), label=label)
    except ValueError as exc:
        raise DatasetFormatError(f"{path}:{first_line}: {exc}") from exc


def _load_csv(path) -> list[Bag]:
    bags: list[Bag] = []
    finished: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}:1: empty file, header row required")
        if len(header) < 3 or header[0] != "bag_id" or header[1] != "label":
            raise DatasetFormatError(f"{path}:1: header must be bag_id,label,f1,...,fd")
        d = len(header) - 2

        cur_id = None
        cur_label = None
        cur_rows: list[list[float]] = []
        cur_first_line = 0
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise DatasetFormatError(
                    f"{path}:{line_no}: expected {d + 2} columns, got {len(row)}"
                )
            bag_id = row[0]
            label = _parse_label(row[1], path, line_no)
            try:
                feats = [float(v) for v in row[2:]]
            except ValueError:
                raise DatasetFormatError(f"{path}:{line_no}: malformed feature value")
            if bag_id != cur_id:
                if cur_id is not None:
                    bags.append(_finish_bag(cur_id, cur_label, cur_rows, path, cur_first_line))
                    finished.add(cur_id)
                if bag_id in finished:
                    raise DatasetFormatError(
                        f"{path}:{line_no}: duplicate bag id {bag_id!r} "
                        "(rows of one bag must be contiguous)"
                    )
                cur_id, cur_label, cur_rows = bag_id, label, []
                cur_first_line = line_no
            elif label != cur_label:
                raise DatasetFormatError(
                    f"{path}:{line_no}: conflicting label for bag {bag_id!r}"
                )
            cur_rows.append(feats)
        if cur_id is not None:
            bags.append(_finish_bag(cur_id, cur_label, cur_rows, path, cur_first_line))
    return bags


def _load_jsonl(path) -> list[Bag]:
    bags: list[Bag] = []
    seen: set[str] = set()
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{path}:{line_no}: invalid JSON: {exc}")
            if not isinstance(obj, dict) or "id" not in obj or "instances" not in obj:
                raise DatasetFormatError(
                    f"{path}:{line_no}: each line needs 'id' and 'instances' keys"
                )
            bag_id = str(obj["id"])
            if bag_id in seen:
                raise DatasetFormatError(f"{path}:{line_no}: duplicate bag id {bag_id!r}")
            seen.add(bag_id)
            raw_label = obj.get("label")
            if raw_label is None:
                label = None
            elif raw_label in (1, -1):
                label = int(raw_label)
            else:
                raise DatasetFormatError(
                    f"{path}:{line_no}: label must be 1, -1 or null, got {raw_label!r}"
                )
            inst = obj["instances"]
            if not isinstance(inst, list) or not inst:
                raise DatasetFormatError(f"{path}:{line_no}: instances must be a nonempty list")
            widths = {len(r) if isinstance(r, list) else -1 for r in inst}
            if len(widths) != 1 or -1 in widths:
                raise DatasetFormatError(
                    f"{path}:{line_no}: instances of bag {bag_id!r} differ in dimension"
                )
            bags.append(_finish_bag(bag_id, label, inst, path, line_no))
    return bags


def load_dataset(path, format: str = "csv", split_tag: str = "unsplit") -> MILDataset:
    """Load a dataset, validating dimensions and bag-id uniqueness.

    Raises DatasetFormatError with a line number for malformed rows,
    inconsistent dimensions, or duplicate bag ids.
    """
    path = Path(path)
    if format == "csv":
        bags = _load_csv(path)
    elif format == "jsonl":
        bags = _load_jsonl(path)
    else:
        raise ValueError(f"unknown format {format!r}")
    if not bags:
        raise DatasetFormatError(f"{path}: no bags found")
    dims = {bag.dim for bag in bags}
    if len(dims) != 1:
        raise DatasetFormatError(f"{path}: inconsistent instance dimensions {sorted(dims)}")
    try:
        return MILDataset(bags=tuple(bags), dim=dims.pop(), split_tag=split_tag)
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from exc


def save_dataset(ds: MILDataset, path, format: str = "csv") -> None:
    """Write a dataset so that load_dataset reproduces it exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bag_id", "label"] + [f"f{i + 1}" for i in range(ds.dim)])
            for bag in ds.bags:
                label = "" if bag.label is None else str(bag.label)
                for row in bag.instances:
                    writer.writerow([bag.id, label] + [_format_float(v) for v in row])
    elif format == "jsonl":
        with open(path, "w") as fh:
            for bag in ds.bags:
                obj = {
                    "id": bag.id,
                    "label": bag.label,
                    "instances": [[float(v) for v in row] for row in bag.instances],
                }
                fh.write(json.dumps(obj) + "\n")
    else:
        raise ValueError(f"unknown format {format!r}")


def split_subsample(ds: MILDataset, fraction: float, seed: int) -> MILDataset:
    """Bag-level subsample, stratified by class, deterministic for a seed.

    Samples without replacement, keeping class proportions to within one
    bag per class.  Bags keep their original dataset order.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    if fraction * len(ds.bags) < 1.0:
        raise ValueError("fraction too small: subsample would be empty")
    if fraction == 1.0:
        return ds.with_split_tag("train_sub")

    by_class: dict[int | None, list[int]] = {}
    for i, bag in enumerate(ds.bags):
        by_class.setdefault(bag.label, []).append(i)

    rng = np.random.default_rng(seed)
    chosen: list[int] = []
    # Iterate strata in a fixed order so the draw sequence is reproducible.
    for label in sorted(by_class, key=lambda v: (v is None, v)):
        idx = by_class[label]
        k = int(round(fraction * len(idx)))
        k = min(max(k, 0), len(idx))
        picked = rng.choice(idx, size=k, replace=False) if k else np.array([], dtype=int)
        chosen.extend(int(v) for v in picked)
    if not chosen:
        raise ValueError("subsample is empty")
    chosen.sort()
    bags = tuple(ds.bags[i] for i in chosen)
    return MILDataset(bags=bags, dim=ds.dim, split_tag="train_sub")
