"""Synthetic MIL dataset generators.

Three problem families with known ground truth:

* concept: positive bags contain a few "witness" instances drawn from a
  planted Gaussian concept; everything else is background.  Optionally
  the background of positive bags is offset so both classes share the
  same expected bag mean (signal visible only to concept methods).
* distribution: every instance of a positive bag is drawn from a
  slightly shifted background; there are no witnesses, the signal is
  diffuse.
* histogram: instances are concatenated normalized histograms (41 bins
  per block) drawn from Dirichlets; the positive class' mass sits at
  lower bin indices.

Generation is bit-for-bit reproducible from the seed.  Ground-truth
instance labels travel in a sidecar structure that trainers never see.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .bags import Bag, MILDataset

KINDS = ("concept", "distribution", "histogram")
BINS_PER_BLOCK = 41


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    d: int = 20
    bags_per_class: int = 100
    instances_per_bag: int = 50
    witness_rate: float = 0.2
    shift: float = 0.5
    sigma: float = 1.0
    seed: int = 0
    # concept kind: offset positive-bag background so class means match
    match_means: bool = False
    # concept kind: distance of the planted center from the background
    # mean, in multiples of sigma
    concept_distance: float = 4.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.d < 1 or self.bags_per_class < 1 or self.instances_per_bag < 1:
            raise ValueError("all counts must be positive")
        if not 0.0 < self.witness_rate <= 1.0:
            raise ValueError("witness_rate must be in (0, 1]")
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        if self.shift < 0.0:
            raise ValueError("shift must be nonnegative")
        if self.kind == "histogram" and self.d % BINS_PER_BLOCK != 0:
            raise ValueError(
                f"histogram kind needs d to be a multiple of {BINS_PER_BLOCK}"
            )


@dataclass
class GroundTruth:
    """Sidecar instance labels; only evaluation and oracle tests read it."""

    instance_labels: dict[str, np.ndarray]  # +1 signal / -1 background per instance
    witness_mask: dict[str, np.ndarray]  # True only for concept witnesses
    concept_center: np.ndarray | None = None

    def witness_count(self) -> int:
        return int(sum(mask.sum() for mask in self.witness_mask.values()))


def _unit_direction(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


def _gen_concept(spec: GeneratorSpec, struct_rng, rng, ids_pos, ids_neg):
    n, d, sigma = spec.instances_per_bag, spec.d, spec.sigma
    center = spec.concept_distance * sigma * _unit_direction(struct_rng, d)
    n_wit = int(np.ceil(spec.witness_rate * n))
    filler_mean = np.zeros(d)
    if spec.match_means and n_wit < n:
        # offset the fillers so E[bag mean] is zero for both classes
        filler_mean = -center * n_wit / (n - n_wit)

    bags, labels_gt, masks = [], {}, {}
    for bag_id in ids_pos:
        wit = center + sigma * rng.normal(size=(n_wit, d))
        fill = filler_mean + sigma * rng.normal(size=(n - n_wit, d))
        inst = np.concatenate([wit, fill], axis=0)
        order = rng.permutation(n)
        inst = inst[order]
        mask = order < n_wit
        bags.append(Bag(id=bag_id, instances=inst, label=1))
        masks[bag_id] = mask
        labels_gt[bag_id] = np.where(mask, 1, -1)
    for bag_id in ids_neg:
        inst = sigma * rng.normal(size=(n, d))
        bags.append(Bag(id=bag_id, instances=inst, label=-1))
        masks[bag_id] = np.zeros(n, dtype=bool)
        labels_gt[bag_id] = np.full(n, -1)
    return bags, GroundTruth(labels_gt, masks, concept_center=center)


def _gen_distribution(spec: GeneratorSpec, struct_rng, rng, ids_pos, ids_neg):
    n, d, sigma = spec.instances_per_bag, spec.d, spec.sigma
    offset = spec.shift * sigma * _unit_direction(struct_rng, d)

    bags, labels_gt, masks = [], {}, {}
    for bag_id in ids_pos:
        inst = offset + sigma * rng.normal(size=(n, d))
        bags.append(Bag(id=bag_id, instances=inst, label=1))
        masks[bag_id] = np.zeros(n, dtype=bool)  # diffuse: no witnesses
        labels_gt[bag_id] = np.full(n, 1)
    for bag_id in ids_neg:
        inst = sigma * rng.normal(size=(n, d))
        bags.append(Bag(id=bag_id, instances=inst, label=-1))
        masks[bag_id] = np.zeros(n, dtype=bool)
        labels_gt[bag_id] = np.full(n, -1)
    return bags, GroundTruth(labels_gt, masks)


def _bin_profile(center: float, width: float) -> np.ndarray:
    bins = np.arange(BINS_PER_BLOCK, dtype=float)
    prof = np.exp(-0.5 * ((bins - center) / width) ** 2) + 1e-4
    return prof / prof.sum()


def _gen_histogram(spec: GeneratorSpec, struct_rng, rng, ids_pos, ids_neg):
    n = spec.instances_per_bag
    n_blocks = spec.d // BINS_PER_BLOCK
    width = 4.0 * spec.sigma
    concentration = 60.0
    center_neg = 0.6 * (BINS_PER_BLOCK - 1)
    # positive-class mass sits `shift` bins lower (darker-texture analogue)
    center_pos = center_neg - spec.shift

    alpha_pos = concentration * _bin_profile(center_pos, width)
    alpha_neg = concentration * _bin_profile(center_neg, width)

    def draw_bag(alpha):
        blocks = [rng.dirichlet(alpha, size=n) for _ in range(n_blocks)]
        return np.concatenate(blocks, axis=1)

    bags, labels_gt, masks = [], {}, {}
    for bag_id in ids_pos:
        bags.append(Bag(id=bag_id, instances=draw_bag(alpha_pos), label=1))
        masks[bag_id] = np.zeros(n, dtype=bool)
        labels_gt[bag_id] = np.full(n, 1)
    for bag_id in ids_neg:
        bags.append(Bag(id=bag_id, instances=draw_bag(alpha_neg), label=-1))
        masks[bag_id] = np.zeros(n, dtype=bool)
        labels_gt[bag_id] = np.full(n, -1)
    return bags, GroundTruth(labels_gt, masks)


def generate(
    spec: GeneratorSpec, id_prefix: str = "bag", noise_stream: int = 0
) -> tuple[MILDataset, GroundTruth]:
    """Generate a dataset plus its ground-truth sidecar.

    The planted structure (concept center, shift direction) depends only
    on ``spec.seed``, so datasets generated with different noise streams
    share the same underlying problem.  Bag noise depends on both the
    seed and the stream.
    """
    struct_rng = np.random.default_rng([spec.seed, 104729])
    rng = np.random.default_rng([spec.seed, 7919, noise_stream])
    ids_pos = [f"{id_prefix}_p{i:04d}" for i in range(spec.bags_per_class)]
    ids_neg = [f"{id_prefix}_n{i:04d}" for i in range(spec.bags_per_class)]
    if spec.kind == "concept":
        bags, gt = _gen_concept(spec, struct_rng, rng, ids_pos, ids_neg)
    elif spec.kind == "distribution":
        bags, gt = _gen_distribution(spec, struct_rng, rng, ids_pos, ids_neg)
    else:
        bags, gt = _gen_histogram(spec, struct_rng, rng, ids_pos, ids_neg)
    return MILDataset(bags=tuple(bags), dim=spec.d), gt


def generate_splits(
    spec: GeneratorSpec, seed: int | None = None
) -> tuple[MILDataset, MILDataset, MILDataset, dict[str, GroundTruth]]:
    """Train/validation/test triple over one shared planted problem.

    All three splits see the same concept center or shift direction;
    only the bag noise differs.  Bag ids are disjoint across splits.
    """
    if seed is not None:
        spec = replace(spec, seed=seed)
    out = []
    truths = {}
    for i, (tag, prefix) in enumerate(
        [("train", "tr"), ("validation", "va"), ("test", "te")]
    ):
        ds, gt = generate(spec, id_prefix=prefix, noise_stream=i + 1)
        out.append(ds.with_split_tag(tag))
        truths[tag] = gt
    return out[0], out[1], out[2], truths


def save_instance_labels(gt: GroundTruth, ds: MILDataset, path) -> None:
    """Write the sidecar as CSV rows ``bag_id,instance_index,z``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bag_id", "instance_index", "z"])
        for bag in ds.bags:
            z = gt.instance_labels[bag.id]
            for idx in range(bag.n_instances):
                writer.writerow([bag.id, idx, int(z[idx])])
