"""Tests for AUC, DeLong and t tests, and the selection/subsample protocol.

Oracles: exhaustive pair counting for AUC, a from-scratch double-loop
implementation of the paired placement-covariance test, and the direct
paired-t formula.
"""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from milkit.bags import Bag, MILDataset
from milkit.embed import train_embed_classifier
from milkit.evaluation import (
    ProtocolReport,
    compute_auc,
    delong_test,
    dependent_ttest,
    run_protocol,
    save_roc_csv,
)
from milkit.scoring import TrainedModel
from milkit.synth import GeneratorSpec, generate_splits

from conftest import make_dataset


def _auc_brute_force(scores, labels) -> float:
    """Exhaustive positive-negative pair counting."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == -1]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def _delong_reference(scoresA, scoresB, labels):
    """Independent double-loop paired placement-covariance computation."""
    X = [(a, b) for (a, b), y in zip(zip(scoresA, scoresB), labels) if y == 1]
    Y = [(a, b) for (a, b), y in zip(zip(scoresA, scoresB), labels) if y == -1]
    m, n = len(X), len(Y)

    def psi(x, y):
        return 1.0 if x > y else (0.5 if x == y else 0.0)

    aucs = []
    V10 = []
    V01 = []
    for r in range(2):
        v10 = [sum(psi(x[r], y[r]) for y in Y) / n for x in X]
        v01 = [sum(psi(x[r], y[r]) for x in X) / m for y in Y]
        aucs.append(sum(v10) / m)
        V10.append(v10)
        V01.append(v01)

    def cov(u, v, mu_u, mu_v):
        return sum((a - mu_u) * (b - mu_v) for a, b in zip(u, v)) / (len(u) - 1)

    S = [[0.0, 0.0], [0.0, 0.0]]
    for r in range(2):
        for s in range(2):
            S[r][s] = (
                cov(V10[r], V10[s], aucs[r], aucs[s]) / m
                + cov(V01[r], V01[s], aucs[r], aucs[s]) / n
            )
    var = S[0][0] + S[1][1] - 2.0 * S[0][1]
    diff = aucs[0] - aucs[1]
    if var <= 0.0:
        return (0.0, 1.0) if diff == 0.0 else (math.inf, 0.0)
    z = diff / math.sqrt(var)
    return z, 2.0 * stats.norm.sf(abs(z))


# ---------------------------------------------------------------------------
# compute_auc
# ---------------------------------------------------------------------------


def test_auc_perfect_ranking():
    roc = compute_auc([0.9, 0.8, 0.2, 0.1], [1, 1, -1, -1])
    assert roc.auc == 1.0


def test_auc_all_ties_is_half():
    roc = compute_auc([0.5, 0.5, 0.5, 0.5], [1, -1, 1, -1])
    assert roc.auc == 0.5


def test_auc_single_class_error():
    with pytest.raises(ValueError, match="classes"):
        compute_auc([0.1, 0.2], [1, 1])


def test_auc_known_mixed_case():
    # pairs: (0.8>0.3)=1, (0.8>0.5)=1, (0.4>0.3)=1, (0.4<0.5)=0 -> 3/4
    roc = compute_auc([0.8, 0.4, 0.3, 0.5], [1, 1, -1, -1])
    assert roc.auc == pytest.approx(0.75)


@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_auc_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 21))
    scores = rng.choice([0.1, 0.25, 0.5, 0.7, 0.9], size=n)  # forces ties
    labels = np.where(rng.random(n) < 0.5, 1, -1)
    if not (np.any(labels == 1) and np.any(labels == -1)):
        labels[0], labels[1] = 1, -1
    assert compute_auc(scores, labels).auc == _auc_brute_force(scores, labels)


@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_auc_monotone_transform_invariant_and_complement(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 20))
    scores = rng.normal(size=n).round(1)
    labels = np.where(rng.random(n) < 0.5, 1, -1)
    if not (np.any(labels == 1) and np.any(labels == -1)):
        labels[0], labels[1] = 1, -1
    base = compute_auc(scores, labels).auc
    assert compute_auc(np.exp(scores) * 3.0 + 1.0, labels).auc == pytest.approx(base, abs=1e-12)
    assert compute_auc(-scores, labels).auc == pytest.approx(1.0 - base, abs=1e-12)


def test_roc_points_monotone_and_anchored(rng):
    scores = rng.normal(size=30).round(1)
    labels = np.where(rng.random(30) < 0.4, 1, -1)
    labels[:2] = [1, -1]
    roc = compute_auc(scores, labels)
    pts = roc.points
    np.testing.assert_allclose(pts[0], [0.0, 0.0])
    np.testing.assert_allclose(pts[-1], [1.0, 1.0])
    assert np.all(np.diff(pts[:, 0]) >= 0.0)
    assert np.all(np.diff(pts[:, 1]) >= 0.0)


def test_roc_csv_format(tmp_path):
    roc = compute_auc([0.9, 0.1], [1, -1])
    path = tmp_path / "roc.csv"
    save_roc_csv(roc, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "fpr,tpr"
    assert lines[1] == "0,0"
    assert lines[-1] == "1,1"


# ---------------------------------------------------------------------------
# DeLong test
# ---------------------------------------------------------------------------


def test_delong_identical_scores_p_one(rng):
    scores = rng.normal(size=12)
    labels = np.array([1] * 6 + [-1] * 6)
    res = delong_test(scores, scores, labels)
    assert res.p_value == 1.0
    assert res.degenerate
    assert res.test == "delong_paired"
    assert not res.significant


def test_delong_perfect_vs_antiperfect():
    rng = np.random.default_rng(0)
    labels = np.array([1] * 10 + [-1] * 10)
    base = np.concatenate([rng.uniform(1, 2, 10), rng.uniform(-2, -1, 10)])
    res = delong_test(base, -base, labels)
    assert res.p_value < 0.05


def test_delong_symmetric_in_argument_order(rng):
    labels = np.array([1] * 8 + [-1] * 8)
    a = rng.normal(size=16)
    b = rng.normal(size=16)
    r1 = delong_test(a, b, labels)
    r2 = delong_test(b, a, labels)
    assert r1.p_value == pytest.approx(r2.p_value, abs=1e-15)
    assert r1.statistic == pytest.approx(-r2.statistic, abs=1e-15)


@given(st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=40)
def test_delong_matches_double_loop_reference(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 9))
    n = int(rng.integers(2, 9))
    labels = np.array([1] * m + [-1] * n)
    a = rng.normal(size=m + n).round(1)
    b = rng.normal(size=m + n).round(1)
    ours = delong_test(a, b, labels)
    z_ref, p_ref = _delong_reference(a, b, labels)
    if math.isinf(z_ref):
        assert ours.degenerate
    else:
        assert ours.statistic == pytest.approx(z_ref, abs=1e-10)
        assert ours.p_value == pytest.approx(p_ref, abs=1e-10)


@given(st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=30)
def test_delong_invariant_under_monotone_transforms(seed):
    rng = np.random.default_rng(seed)
    labels = np.array([1] * 6 + [-1] * 6)
    a = rng.normal(size=12).round(1)
    b = rng.normal(size=12).round(1)
    base = delong_test(a, b, labels)
    warped = delong_test(np.exp(a), 5.0 * b + 2.0, labels)
    assert warped.p_value == pytest.approx(base.p_value, abs=1e-10)


def test_delong_zero_variance_nonzero_diff():
    # one positive and one negative: variance is undefined -> degenerate
    res = delong_test([1.0, 0.0], [0.0, 1.0], [1, -1])
    assert res.degenerate
    assert res.p_value == 0.0


def test_delong_input_validation():
    with pytest.raises(ValueError):
        delong_test([1.0], [1.0, 2.0], [1, -1])
    with pytest.raises(ValueError, match="classes"):
        delong_test([1.0, 2.0], [2.0, 1.0], [1, 1])


# ---------------------------------------------------------------------------
# Dependent t-test
# ---------------------------------------------------------------------------


def test_ttest_identical_vectors():
    res = dependent_ttest([0.7] * 10, [0.7] * 10)
    assert res.p_value == 1.0 and res.degenerate


def test_ttest_constant_nonzero_difference():
    a = np.linspace(0.5, 0.9, 10)
    res = dependent_ttest(a + 0.1, a)
    assert res.p_value < 1e-6


def test_ttest_matches_textbook_formula():
    a = [0.71, 0.68, 0.74, 0.70, 0.66, 0.73, 0.69, 0.72, 0.75, 0.67]
    b = [0.65, 0.66, 0.70, 0.69, 0.60, 0.71, 0.64, 0.70, 0.70, 0.66]
    d = [x - y for x, y in zip(a, b)]
    n = len(d)
    mean = sum(d) / n
    sd = math.sqrt(sum((x - mean) ** 2 for x in d) / (n - 1))
    t_ref = mean / (sd / math.sqrt(n))
    p_ref = 2.0 * stats.t.sf(abs(t_ref), df=n - 1)
    res = dependent_ttest(a, b)
    assert res.statistic == pytest.approx(t_ref, abs=1e-9)
    assert res.p_value == pytest.approx(p_ref, abs=1e-9)
    assert res.test == "t_dependent"


def test_ttest_validation():
    with pytest.raises(ValueError):
        dependent_ttest([0.5], [0.5])
    with pytest.raises(ValueError):
        dependent_ttest([0.5, 0.6], [0.5, 0.6, 0.7])


# ---------------------------------------------------------------------------
# Protocol
# ---------------------------------------------------------------------------


class _MeanScoreModel(TrainedModel):
    """Scores a bag by its grand mean plus a fixed offset."""

    def __init__(self, offset=0.0):
        self.offset = offset

    def score(self, bag):
        return float(bag.instances.mean()) + self.offset


def _dummy_trainer(ds, hyper, seed):
    return _MeanScoreModel(offset=float(hyper.get("offset", 0.0)))


def _mean_inst_trainer(ds, hyper, seed):
    return train_embed_classifier(ds, "mean_inst", "svm", hyper, seed=seed)


def _protocol_datasets(seed=0):
    spec = GeneratorSpec(
        kind="distribution", d=8, bags_per_class=12, instances_per_bag=6,
        shift=0.8, seed=seed,
    )
    train, val, test, _ = generate_splits(spec)
    return train, val, test


def test_protocol_single_point_grid():
    train, val, test = _protocol_datasets()
    report = run_protocol(train, val, test, "dummy", _dummy_trainer, [{"offset": 0.0}])
    assert report.best_hyper == {"offset": 0.0}
    assert 0.0 <= report.auc_val <= 1.0
    assert 0.0 <= report.auc_test <= 1.0
    assert len(report.subsample_aucs) == 10
    assert report.roc_val().auc == pytest.approx(report.auc_val)
    assert report.roc_test().auc == pytest.approx(report.auc_test)


def test_protocol_validation_tie_keeps_first_grid_point():
    train, val, test = _protocol_datasets()
    # the dummy trainer ignores the hyperparameter entirely, so every
    # grid point scores identically and the tie must keep the first
    grid = [{"offset": 3.0}, {"offset": 7.0}]
    report = run_protocol(train, val, test, "dummy", _dummy_trainer, grid)
    assert report.best_hyper == {"offset": 3.0}
    assert all(h == {"offset": 3.0} for h in report.subsample_hypers)


def test_protocol_deterministic():
    train, val, test = _protocol_datasets()
    grid = [{"C": 0.1, "degree": 1}, {"C": 1.0, "degree": 1}]
    r1 = run_protocol(train, val, test, "mean_inst", _mean_inst_trainer, grid, seed=4)
    r2 = run_protocol(train, val, test, "mean_inst", _mean_inst_trainer, grid, seed=4)
    assert r1.to_json() == r2.to_json()


def test_protocol_rejects_leaked_splits():
    train, val, test = _protocol_datasets()
    with pytest.raises(ValueError, match="leakage"):
        run_protocol(train, val, train, "dummy", _dummy_trainer, [{}])


def test_protocol_rejects_empty_grid():
    train, val, test = _protocol_datasets()
    with pytest.raises(ValueError, match="grid"):
        run_protocol(train, val, test, "dummy", _dummy_trainer, [])


def test_protocol_subsample_mean_close_to_full():
    # halving the training bags should cost at most a few AUC points on
    # data the classifier handles comfortably
    spec = GeneratorSpec(
        kind="distribution", d=20, bags_per_class=20, instances_per_bag=20,
        shift=0.8, seed=0,
    )
    train, val, test, _ = generate_splits(spec)
    grid = [{"C": 1.0, "degree": 1}]
    report = run_protocol(train, val, test, "mean_inst", _mean_inst_trainer, grid, seed=0)
    assert report.auc_test > 0.9  # the finding is only meaningful off the floor
    assert report.subsample_mean <= report.auc_test + 0.05


def test_protocol_report_json_key_order():
    train, val, test = _protocol_datasets()
    report = run_protocol(train, val, test, "dummy", _dummy_trainer, [{}])
    payload = json.loads(report.to_json())
    assert list(payload) == [
        "classifier", "seed", "grid", "best_hyper", "auc_val", "auc_test",
        "subsample_mean", "subsample_std", "subsample_aucs", "subsample_hypers",
        "val_scores", "test_scores", "val_labels", "test_labels",
    ]
    assert len(payload["subsample_aucs"]) == 10
