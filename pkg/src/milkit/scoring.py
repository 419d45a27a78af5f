"""Uniform bag-scoring interface and posterior-odds helpers.

Every trained MIL classifier exposes ``score(bag) -> float``, a
nonnegative posterior-odds value p(y=+1|B) / p(y=-1|B) used for ranking
and AUC.  Odds saturate at MAX_ODDS instead of overflowing.
"""

from __future__ import annotations

import math

import numpy as np

from .bags import Bag, MILDataset

# Representable saturation value for "infinite" odds.
MAX_ODDS = 1e300


def clamp_posterior(p, epsilon: float):
    """Clamp posterior(s) into [epsilon, 1 - epsilon]."""
    if not 0.0 < epsilon < 0.5:
        raise ValueError("epsilon must be in (0, 0.5)")
    return np.clip(p, epsilon, 1.0 - epsilon)


def posterior_to_odds(p: float) -> float:
    """p / (1 - p), saturating at MAX_ODDS for p -> 1."""
    if p >= 1.0:
        return MAX_ODDS
    if p <= 0.0:
        return 0.0
    return min(p / (1.0 - p), MAX_ODDS)


def log_odds(odds: float) -> float:
    """Natural log of an odds ratio, for numeric display; -inf at 0."""
    if odds <= 0.0:
        return -math.inf
    return math.log(odds)


class TrainedModel:
    """Base class for fitted bag classifiers.

    Subclasses implement :meth:`score`; ``score_dataset`` is a
    convenience loop kept deterministic in dataset order.
    """

    def score(self, bag: Bag) -> float:
        raise NotImplementedError

    def score_dataset(self, ds: MILDataset) -> np.ndarray:
        return np.array([self.score(bag) for bag in ds.bags], dtype=float)
