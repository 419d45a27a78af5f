"""ROC/AUC computation, paired significance tests, and the experiment
protocol: grid selection on a validation set, test evaluation, and ten
50% training subsamples with per-repeat re-selection.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bags import MILDataset, split_subsample


def _midranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    n = len(x)
    ranks = np.empty(n)
    i = 0
    while i < n:
        j = i
        while j < n and xs[j] == xs[i]:
            j += 1
        ranks[i:j] = 0.5 * (i + 1 + j)  # average of ranks i+1 .. j
        i = j
    out = np.empty(n)
    out[order] = ranks
    return out


@dataclass
class RocResult:
    auc: float
    points: np.ndarray  # (k, 2) rows of (fpr, tpr), (0,0) .. (1,1)
    scores: np.ndarray = field(repr=False, default=None)
    labels: np.ndarray = field(repr=False, default=None)


def compute_auc(scores, labels) -> RocResult:
    """Mann-Whitney AUC with 0.5 credit for ties, plus the ROC polyline.

    The rank formulation is numerically exact: midranks are multiples of
    0.5, so the pair-counting value is reproduced bit for bit.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    pos = labels == 1
    neg = labels == -1
    n_pos = int(pos.sum())
    n_neg = int(neg.sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    ranks = _midranks(scores)
    auc = (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    order = np.argsort(-scores, kind="stable")
    ys = labels[order]
    ss = scores[order]
    tp = np.cumsum(ys == 1)
    fp = np.cumsum(ys == -1)
    # keep one point per distinct threshold (last index of each tie block)
    last = np.r_[ss[1:] != ss[:-1], True]
    points = np.concatenate(
        [[[0.0, 0.0]], np.column_stack([fp[last] / n_neg, tp[last] / n_pos])]
    )
    return RocResult(auc=float(auc), points=points, scores=scores, labels=labels)


def save_roc_csv(roc: RocResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for fpr, tpr in roc.points:
            writer.writerow([format(fpr, ".17g"), format(tpr, ".17g")])


# ---------------------------------------------------------------------------
# Paired significance tests
# ---------------------------------------------------------------------------


@dataclass
class SignificanceResult:
    statistic: float
    p_value: float
    test: str  # delong_paired or t_dependent
    alpha: float = 0.05
    degenerate: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p_value must lie in [0, 1]")

    @property
    def significant(self) -> bool:
        return self.p_value < self.alpha


def _placements(scores: np.ndarray, pos: np.ndarray, neg: np.ndarray):
    """DeLong placement values per positive (V10) and negative (V01)."""
    sp = scores[pos][:, None]
    sn = scores[neg][None, :]
    wins = (sp > sn) + 0.5 * (sp == sn)
    return wins.mean(axis=1), 1.0 - wins.mean(axis=0)


def delong_test(scoresA, scoresB, labels, alpha: float = 0.05) -> SignificanceResult:
    """Paired DeLong test for the difference of two correlated AUCs."""
    scoresA = np.asarray(scoresA, dtype=float)
    scoresB = np.asarray(scoresB, dtype=float)
    labels = np.asarray(labels)
    if not (scoresA.shape == scoresB.shape == labels.shape):
        raise ValueError("score vectors and labels must have equal length")
    pos = labels == 1
    neg = labels == -1
    m = int(pos.sum())
    n = int(neg.sum())
    if m == 0 or n == 0:
        raise ValueError("DeLong test needs both classes present")

    v10a, v01a = _placements(scoresA, pos, neg)
    v10b, v01b = _placements(scoresB, pos, neg)
    auc_a = float(v10a.mean())
    auc_b = float(v10b.mean())

    if m < 2 or n < 2:
        var = 0.0
    else:
        s10 = np.cov(np.stack([v10a, v10b]), ddof=1)
        s01 = np.cov(np.stack([v01a, v01b]), ddof=1)
        S = s10 / m + s01 / n
        var = float(S[0, 0] + S[1, 1] - 2.0 * S[0, 1])

    diff = auc_a - auc_b
    if var <= 0.0:
        if diff == 0.0:
            return SignificanceResult(0.0, 1.0, "delong_paired", alpha, degenerate=True)
        return SignificanceResult(
            math.copysign(math.inf, diff), 0.0, "delong_paired", alpha, degenerate=True
        )
    z = diff / math.sqrt(var)
    p = float(2.0 * stats.norm.sf(abs(z)))
    return SignificanceResult(float(z), min(p, 1.0), "delong_paired", alpha)


def dependent_ttest(aucsA, aucsB, alpha: float = 0.05) -> SignificanceResult:
    """Two-sided paired t-test on AUC differences, dof n - 1."""
    a = np.asarray(aucsA, dtype=float)
    b = np.asarray(aucsB, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two equal-length vectors of at least 2 values")
    d = a - b
    n = len(d)
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return SignificanceResult(0.0, 1.0, "t_dependent", alpha, degenerate=True)
        return SignificanceResult(
            math.copysign(math.inf, mean), 0.0, "t_dependent", alpha, degenerate=True
        )
    t = mean / (sd / math.sqrt(n))
    p = float(2.0 * stats.t.sf(abs(t), df=n - 1))
    return SignificanceResult(float(t), min(p, 1.0), "t_dependent", alpha)


# ---------------------------------------------------------------------------
# Full experiment protocol
# ---------------------------------------------------------------------------

N_SUBSAMPLE_REPEATS = 10
SUBSAMPLE_FRACTION = 0.5


@dataclass
class ProtocolReport:
    classifier: str
    seed: int
    grid: list[dict]
    best_hyper: dict
    auc_val: float
    auc_test: float
    subsample_aucs: list[float]
    subsample_hypers: list[dict]
    val_scores: np.ndarray = field(repr=False, default=None)
    test_scores: np.ndarray = field(repr=False, default=None)
    val_labels: np.ndarray = field(repr=False, default=None)
    test_labels: np.ndarray = field(repr=False, default=None)

    @property
    def subsample_mean(self) -> float:
        return float(np.mean(self.subsample_aucs))

    @property
    def subsample_std(self) -> float:
        return float(np.std(self.subsample_aucs, ddof=1))

    def roc_val(self) -> RocResult:
        return compute_auc(self.val_scores, self.val_labels)

    def roc_test(self) -> RocResult:
        return compute_auc(self.test_scores, self.test_labels)

    def to_json(self) -> str:
        """Serialize with a fixed key order for byte-stable artifacts."""
        payload = {
            "classifier": self.classifier,
            "seed": self.seed,
            "grid": self.grid,
            "best_hyper": self.best_hyper,
            "auc_val": self.auc_val,
            "auc_test": self.auc_test,
            "subsample_mean": self.subsample_mean,
            "subsample_std": self.subsample_std,
            "subsample_aucs": list(self.subsample_aucs),
            "subsample_hypers": self.subsample_hypers,
            "val_scores": [float(v) for v in self.val_scores],
            "test_scores": [float(v) for v in self.test_scores],
            "val_labels": [int(v) for v in self.val_labels],
            "test_labels": [int(v) for v in self.test_labels],
        }
        return json.dumps(payload, indent=2, sort_keys=False)


def _check_disjoint(train: MILDataset, val: MILDataset, test: MILDataset) -> None:
    ids_tr = set(train.bag_ids())
    ids_va = set(val.bag_ids())
    ids_te = set(test.bag_ids())
    shared = (ids_tr & ids_va) | (ids_tr & ids_te) | (ids_va & ids_te)
    if shared:
        raise ValueError(f"split leakage: bag ids shared across splits: {sorted(shared)[:5]}")


def _select_on_val(trainer, train, val, grid, seed):
    """Train every grid point, keep the first maximizer of validation AUC."""
    val_labels = val.labels()
    best = None  # (auc, index, hyper, model, scores)
    for idx, hyper in enumerate(grid):
        model = trainer(train, hyper, seed)
        scores = model.score_dataset(val)
        auc = compute_auc(scores, val_labels).auc
        if best is None or auc > best[0]:
            best = (auc, idx, hyper, model, scores)
    return best


def run_protocol(
    train: MILDataset,
    val: MILDataset,
    test: MILDataset,
    name: str,
    trainer,
    grid: list[dict],
    seed: int = 0,
) -> ProtocolReport:
    """Grid selection on val, evaluation on test, 10x 50% subsampling.

    ``trainer(ds, hyper, seed) -> TrainedModel`` must be deterministic in
    its arguments.  Validation ties keep the earliest grid point.  Each
    subsample repeat re-selects hyperparameters on the validation set.
    """
    if not grid:
        raise ValueError("hyperparameter grid must be nonempty")
    _check_disjoint(train, val, test)

    auc_val, _, best_hyper, best_model, val_scores = _select_on_val(
        trainer, train, val, grid, seed
    )
    test_labels = test.labels()
    test_scores = best_model.score_dataset(test)
    auc_test = compute_auc(test_scores, test_labels).auc

    sub_aucs = []
    sub_hypers = []
    for rep in range(N_SUBSAMPLE_REPEATS):
        rep_seed = int(np.random.SeedSequence([seed, 1000 + rep]).generate_state(1)[0])
        sub = split_subsample(train, SUBSAMPLE_FRACTION, seed=rep_seed)
        _, _, hyper_r, model_r, _ = _select_on_val(trainer, sub, val, grid, rep_seed)
        sub_aucs.append(compute_auc(model_r.score_dataset(test), test_labels).auc)
        sub_hypers.append(hyper_r)

    return ProtocolReport(
        classifier=name,
        seed=int(seed),
        grid=list(grid),
        best_hyper=best_hyper,
        auc_val=float(auc_val),
        auc_test=float(auc_test),
        subsample_aucs=sub_aucs,
        subsample_hypers=sub_hypers,
        val_scores=np.asarray(val_scores, dtype=float),
        test_scores=np.asarray(test_scores, dtype=float),
        val_labels=val.labels(),
        test_labels=test_labels,
    )
