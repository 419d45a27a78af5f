"""Bag-label propagation and instance-posterior fusion (SimpleMIL).

Two rules turn instance posteriors p(z=+1|x) into bag odds: noisy-or,
where one positive instance suffices, and averaging, where every
instance contributes.  SimpleMIL trains a plain instance classifier on
propagated bag labels and fuses its posteriors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bags import Bag, MILDataset
from .learners import (
    Standardizer,
    posterior_values,
    train_knn,
    train_logistic,
)
from .scoring import MAX_ODDS, TrainedModel, clamp_posterior

FUSION_KINDS = ("noisy_or", "average")


@dataclass(frozen=True)
class FusionRule:
    kind: str = "noisy_or"
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.kind not in FUSION_KINDS:
            raise ValueError(f"unknown fusion kind {self.kind!r}")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError("epsilon must be in (0, 0.5)")

    def fuse(self, posteriors) -> float:
        if self.kind == "noisy_or":
            return fuse_noisy_or(posteriors, self.epsilon)
        return fuse_average(posteriors, self.epsilon)


def fuse_noisy_or(posteriors, epsilon: float = 1e-12) -> float:
    """Odds that at least one instance is positive.

    (1 - prod(1 - p_k)) / prod(1 - p_k), with p_k clamped into
    [epsilon, 1 - epsilon]; saturates at MAX_ODDS instead of dividing
    by zero.
    """
    p = np.asarray(posteriors, dtype=float)
    if p.size == 0:
        raise ValueError("cannot fuse an empty posterior list")
    p = clamp_posterior(p, epsilon)
    log_q = np.sum(np.log1p(-p))  # log prod(1 - p_k)
    if -log_q > 690.0:  # exp would overflow
        return MAX_ODDS
    return min(float(np.expm1(-log_q)), MAX_ODDS)


def fuse_average(posteriors, epsilon: float = 1e-12) -> float:
    """Mean instance odds: (1/n) * sum p_k / (1 - p_k), clamped as above."""
    p = np.asarray(posteriors, dtype=float)
    if p.size == 0:
        raise ValueError("cannot fuse an empty posterior list")
    p = clamp_posterior(p, epsilon)
    return min(float(np.mean(p / (1.0 - p))), MAX_ODDS)


def propagate_labels(ds: MILDataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Give every instance its bag's label.

    Returns (X, y, bag_index) with one row per instance; raises on an
    unlabeled bag.
    """
    if len(ds.bags) == 0:
        return (
            np.empty((0, ds.dim)),
            np.empty(0, dtype=int),
            np.empty(0, dtype=int),
        )
    X, bag_index = ds.stacked_instances()
    labels = ds.labels()  # raises on unlabeled bags
    return X, labels[bag_index], bag_index


@dataclass
class SimpleMILModel(TrainedModel):
    base: object
    scaler: Standardizer
    rule: FusionRule

    def score(self, bag: Bag) -> float:
        posteriors = posterior_values(self.base, self.scaler.transform(bag.instances))
        return self.rule.fuse(posteriors)


def train_simplemil(ds: MILDataset, base: str, rule: FusionRule, hyper: dict) -> SimpleMILModel:
    """Train an instance classifier on propagated labels.

    ``base`` is "logistic" (hyper: C) or "knn" (hyper: k).  Bag scoring
    fuses the instance posteriors with ``rule``.
    """
    X, y, _ = propagate_labels(ds)
    if not (np.any(y == 1) and np.any(y == -1)):
        raise ValueError("propagated instance set contains a single class")
    scaler = Standardizer()
    Xs = scaler.fit_transform(X)
    if base == "logistic":
        model = train_logistic(Xs, y, C=float(hyper["C"]))
    elif base == "knn":
        model = train_knn(Xs, y, k=int(hyper["k"]))
    else:
        raise ValueError(f"unknown base learner {base!r}")
    return SimpleMILModel(base=model, scaler=scaler, rule=rule)
