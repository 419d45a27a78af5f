"""Tests for the synthetic bag generators and their ground-truth sidecars."""

import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from milkit.bags import datasets_equal
from milkit.synth import (
    BINS_PER_BLOCK,
    GeneratorSpec,
    generate,
    generate_splits,
    save_instance_labels,
)


# ---------------------------------------------------------------------------
# Spec validation
# ---------------------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ValueError):
        GeneratorSpec(kind="gaussian")
    with pytest.raises(ValueError):
        GeneratorSpec(kind="concept", d=0)
    with pytest.raises(ValueError):
        GeneratorSpec(kind="concept", witness_rate=0.0)
    with pytest.raises(ValueError):
        GeneratorSpec(kind="concept", witness_rate=1.2)
    with pytest.raises(ValueError):
        GeneratorSpec(kind="concept", sigma=0.0)
    with pytest.raises(ValueError):
        GeneratorSpec(kind="distribution", shift=-0.1)
    with pytest.raises(ValueError):
        GeneratorSpec(kind="histogram", d=40)  # not a multiple of the block size


def test_spec_defaults_match_reference_scale():
    spec = GeneratorSpec(kind="concept")
    assert spec.instances_per_bag == 50
    assert spec.bags_per_class == 100
    assert spec.d == 20


# ---------------------------------------------------------------------------
# Concept kind
# ---------------------------------------------------------------------------


def test_concept_full_witness_rate():
    spec = GeneratorSpec(kind="concept", d=3, bags_per_class=4, instances_per_bag=5,
                         witness_rate=1.0, seed=0)
    ds, gt = generate(spec)
    for bag in ds.bags:
        if bag.label == 1:
            assert gt.witness_mask[bag.id].all()
            assert (gt.instance_labels[bag.id] == 1).all()


def test_concept_standard_assumption_holds():
    spec = GeneratorSpec(kind="concept", d=4, bags_per_class=6, instances_per_bag=8,
                         witness_rate=0.25, seed=1)
    ds, gt = generate(spec)
    for bag in ds.bags:
        n_wit = int(gt.witness_mask[bag.id].sum())
        if bag.label == 1:
            assert n_wit >= 1
            assert n_wit == int(np.ceil(spec.witness_rate * spec.instances_per_bag))
        else:
            assert n_wit == 0
        # sidecar labels agree with the witness mask
        np.testing.assert_array_equal(
            gt.instance_labels[bag.id] == 1, gt.witness_mask[bag.id]
        )


def test_concept_center_distance_and_witness_placement():
    spec = GeneratorSpec(kind="concept", d=6, bags_per_class=20, instances_per_bag=10,
                         witness_rate=0.4, concept_distance=4.0, sigma=1.0, seed=2)
    ds, gt = generate(spec)
    assert np.linalg.norm(gt.concept_center) == pytest.approx(4.0)
    # witnesses cluster at the center: their mean is far from the origin
    wit = np.concatenate(
        [bag.instances[gt.witness_mask[bag.id]] for bag in ds.bags if bag.label == 1]
    )
    assert np.linalg.norm(wit.mean(axis=0) - gt.concept_center) < 0.5


def test_concept_match_means_zeroes_class_gap():
    n_bags = 300
    base = dict(d=4, bags_per_class=n_bags, instances_per_bag=10,
                witness_rate=0.3, concept_distance=4.0, seed=3)
    plain_ds, _ = generate(GeneratorSpec(kind="concept", **base))
    matched_ds, _ = generate(GeneratorSpec(kind="concept", match_means=True, **base))

    def class_gap(ds):
        means = {1: [], -1: []}
        for bag in ds.bags:
            means[bag.label].append(bag.instances.mean(axis=0))
        return float(np.linalg.norm(
            np.mean(means[1], axis=0) - np.mean(means[-1], axis=0)
        ))

    assert class_gap(plain_ds) > 1.0      # strong first-moment signal
    assert class_gap(matched_ds) < 0.05   # erased up to sampling noise


# ---------------------------------------------------------------------------
# Distribution kind
# ---------------------------------------------------------------------------


def test_distribution_no_witnesses_and_shift():
    spec = GeneratorSpec(kind="distribution", d=5, bags_per_class=50,
                         instances_per_bag=10, shift=1.5, seed=4)
    ds, gt = generate(spec)
    assert gt.witness_count() == 0
    pos = np.concatenate([b.instances for b in ds.bags if b.label == 1])
    neg = np.concatenate([b.instances for b in ds.bags if b.label == -1])
    gap = np.linalg.norm(pos.mean(axis=0) - neg.mean(axis=0))
    assert gap == pytest.approx(1.5, abs=0.2)
    for bag in ds.bags:
        assert (gt.instance_labels[bag.id] == bag.label).all()


# ---------------------------------------------------------------------------
# Histogram kind
# ---------------------------------------------------------------------------


def test_histogram_blocks_normalized_and_shifted():
    spec = GeneratorSpec(kind="histogram", d=2 * BINS_PER_BLOCK, bags_per_class=10,
                         instances_per_bag=6, shift=6.0, seed=5)
    ds, _ = generate(spec)
    bins = np.arange(BINS_PER_BLOCK)
    mean_bin = {1: [], -1: []}
    for bag in ds.bags:
        for block in range(2):
            sl = bag.instances[:, block * BINS_PER_BLOCK : (block + 1) * BINS_PER_BLOCK]
            np.testing.assert_allclose(sl.sum(axis=1), 1.0, atol=1e-9)
            assert np.all(sl >= 0.0)
            mean_bin[bag.label].extend((sl @ bins).tolist())
    # positive-class mass sits at lower bins by roughly the configured shift
    assert np.mean(mean_bin[-1]) - np.mean(mean_bin[1]) == pytest.approx(6.0, abs=1.5)


# ---------------------------------------------------------------------------
# Reproducibility and split structure
# ---------------------------------------------------------------------------


@given(st.integers(min_value=0, max_value=2**31 - 1),
       st.sampled_from(["concept", "distribution", "histogram"]))
@settings(max_examples=15)
def test_generation_reproducible(seed, kind):
    d = BINS_PER_BLOCK if kind == "histogram" else 4
    spec = GeneratorSpec(kind=kind, d=d, bags_per_class=3, instances_per_bag=4, seed=seed)
    ds1, gt1 = generate(spec)
    ds2, gt2 = generate(spec)
    assert datasets_equal(ds1, ds2)
    for bag in ds1.bags:
        np.testing.assert_array_equal(gt1.instance_labels[bag.id], gt2.instance_labels[bag.id])


def test_different_noise_streams_share_structure():
    spec = GeneratorSpec(kind="concept", d=5, bags_per_class=4, instances_per_bag=6, seed=6)
    ds_a, gt_a = generate(spec, noise_stream=1)
    ds_b, gt_b = generate(spec, noise_stream=2)
    np.testing.assert_array_equal(gt_a.concept_center, gt_b.concept_center)
    assert not datasets_equal(ds_a, ds_b)  # noise differs


def test_generate_splits_structure():
    spec = GeneratorSpec(kind="concept", d=4, bags_per_class=5, instances_per_bag=6, seed=7)
    train, val, test, truths = generate_splits(spec)
    assert train.split_tag == "train"
    assert val.split_tag == "validation"
    assert test.split_tag == "test"
    ids = [set(s.bag_ids()) for s in (train, val, test)]
    assert not (ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2])
    assert set(truths) == {"train", "validation", "test"}
    # one shared planted problem across the three splits
    np.testing.assert_array_equal(
        truths["train"].concept_center, truths["test"].concept_center
    )
    # seed override goes through the spec
    train2, _, _, _ = generate_splits(spec, seed=7)
    assert datasets_equal(train, train2)
    train3, _, _, _ = generate_splits(spec, seed=8)
    assert not datasets_equal(train, train3)


def test_sidecar_csv_format(tmp_path):
    spec = GeneratorSpec(kind="concept", d=3, bags_per_class=2, instances_per_bag=4,
                         witness_rate=0.5, seed=8)
    ds, gt = generate(spec)
    path = tmp_path / "labels.csv"
    save_instance_labels(gt, ds, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["bag_id", "instance_index", "z"]
    assert len(rows) == 1 + sum(b.n_instances for b in ds.bags)
    for bag in ds.bags:
        got = [int(r[2]) for r in rows[1:] if r[0] == bag.id]
        assert got == gt.instance_labels[bag.id].astype(int).tolist()
        idx = [int(r[1]) for r in rows[1:] if r[0] == bag.id]
        assert idx == list(range(bag.n_instances))
