"""Bag-level vector representations and the classifiers on top of them.

Five embeddings: per-feature mean (mean-inst), concatenated min and max
(extremes), bag-of-words histograms over a k-means codebook, MILES
maximum-similarity to all training instances, and the dissimilarity
space spanned by all training bags.  Each feeds an SVM or k-NN head.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .bags import Bag, MILDataset
from .distances import measure_fn
from .learners import (
    KnnModel,
    PolyKernel,
    Standardizer,
    posterior_values,
    train_knn,
    train_svm,
)
from .scoring import MAX_ODDS, TrainedModel, clamp_posterior

EMBEDDINGS = (
    "mean_inst",
    "extremes",
    "bow",
    "miles",
    "dissim_meanmin",
    "dissim_emd",
)


def embed_mean_inst(bag: Bag) -> np.ndarray:
    """Per-feature mean of the bag's instances."""
    return bag.instances.mean(axis=0)


def embed_extremes(bag: Bag) -> np.ndarray:
    """Per-feature minimum concatenated with per-feature maximum."""
    return np.concatenate([bag.instances.min(axis=0), bag.instances.max(axis=0)])


# ---------------------------------------------------------------------------
# Bag of words
# ---------------------------------------------------------------------------


@dataclass
class Codebook:
    centers: np.ndarray  # (W, d)
    inertia_path: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float)
        if self.centers.ndim != 2 or self.centers.shape[0] < 1:
            raise ValueError("codebook needs at least one center")
        if not np.all(np.isfinite(self.centers)):
            raise ValueError("codebook centers must be finite")

    @property
    def words(self) -> int:
        return self.centers.shape[0]


def _assign(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # argmin takes the lowest center index on ties
    return np.argmin(cdist(X, centers, "sqeuclidean"), axis=1)


def build_codebook(X: np.ndarray, W: int, seed: int, max_iter: int = 100) -> Codebook:
    """k-means to a local optimum, k-means++ seeding, fixed seed.

    Inertia is recorded after every assignment and never increases.  An
    emptied cluster is re-centered on the point farthest from its
    current center.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= W <= n:
        raise ValueError(f"W must be in [1, {n}]")
    rng = np.random.default_rng(seed)

    centers = np.empty((W, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = cdist(X, centers[:1], "sqeuclidean")[:, 0]
    for w in range(1, W):
        total = d2.sum()
        if total > 0.0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[w] = X[idx]
        d2 = np.minimum(d2, cdist(X, centers[w : w + 1], "sqeuclidean")[:, 0])

    inertia_path = []
    assign = None
    for _ in range(max_iter):
        dist = cdist(X, centers, "sqeuclidean")
        new_assign = np.argmin(dist, axis=1)
        inertia_path.append(float(dist[np.arange(n), new_assign].sum()))
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for w in range(W):
            members = X[assign == w]
            if len(members):
                centers[w] = members.mean(axis=0)
            else:
                far = int(np.argmax(dist[np.arange(n), assign]))
                centers[w] = X[far]
    return Codebook(centers=centers, inertia_path=inertia_path)


def embed_bow(bag: Bag, cb: Codebook) -> np.ndarray:
    """Frequency histogram of nearest-center assignments; sums to 1."""
    if bag.instances.shape[1] != cb.centers.shape[1]:
        raise ValueError(
            f"dimension mismatch: bag {bag.instances.shape[1]}, "
            f"codebook {cb.centers.shape[1]}"
        )
    counts = np.bincount(_assign(bag.instances, cb.centers), minlength=cb.words)
    return counts / bag.n_instances


# ---------------------------------------------------------------------------
# MILES and dissimilarity space
# ---------------------------------------------------------------------------


def median_instance_distance(X: np.ndarray, max_points: int = 1500, seed: int = 0) -> float:
    """Median pairwise Euclidean distance, the usual kernel-width pick.

    Subsamples deterministically above ``max_points`` to bound memory.
    """
    X = np.asarray(X, dtype=float)
    if len(X) > max_points:
        keep = np.random.default_rng(seed).choice(len(X), max_points, replace=False)
        X = X[np.sort(keep)]
    if len(X) < 2:
        return 1.0
    med = float(np.median(pdist(X, "euclidean")))
    return med if med > 0.0 else 1.0


def embed_miles(bag: Bag, prototypes: np.ndarray, sigma: float) -> np.ndarray:
    """Max similarity exp(-||x - p||^2 / sigma^2) to each prototype."""
    prototypes = np.atleast_2d(np.asarray(prototypes, dtype=float))
    if bag.instances.shape[1] != prototypes.shape[1]:
        raise ValueError(
            f"dimension mismatch: bag {bag.instances.shape[1]}, "
            f"prototypes {prototypes.shape[1]}"
        )
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    d2 = cdist(bag.instances, prototypes, "sqeuclidean")
    return np.exp(-d2 / (sigma * sigma)).max(axis=0)


@dataclass(frozen=True)
class PrototypeSet:
    """Reference bags for the dissimilarity space."""

    bags: tuple[Bag, ...]
    measure: str  # meanmin or emd

    def __post_init__(self):
        if len(self.bags) == 0:
            raise ValueError("prototype set must be nonempty")
        if self.measure not in ("meanmin", "emd"):
            raise ValueError("dissimilarity measure must be meanmin or emd")

    def __len__(self) -> int:
        return len(self.bags)


def embed_dissimilarity(bag: Bag, prototypes: PrototypeSet) -> np.ndarray:
    """Vector of bag-to-prototype dissimilarities, query side first."""
    fn = measure_fn(prototypes.measure)
    return np.array([fn(bag, ref) for ref in prototypes.bags])


# ---------------------------------------------------------------------------
# Embedding + head classifier
# ---------------------------------------------------------------------------


@dataclass
class EmbedModel(TrainedModel):
    """Fitted embedding artifacts plus a vector classifier head."""

    embedding: str
    head: object  # SvmModel or KnnModel
    scaler: Standardizer
    codebook: Codebook | None = None
    miles_prototypes: np.ndarray | None = None
    miles_sigma: float | None = None
    prototype_set: PrototypeSet | None = None
    epsilon: float = 1e-12

    def embed(self, bag: Bag) -> np.ndarray:
        if self.embedding == "mean_inst":
            return embed_mean_inst(bag)
        if self.embedding == "extremes":
            return embed_extremes(bag)
        if self.embedding == "bow":
            return embed_bow(bag, self.codebook)
        if self.embedding == "miles":
            return embed_miles(bag, self.miles_prototypes, self.miles_sigma)
        return embed_dissimilarity(bag, self.prototype_set)

    def score(self, bag: Bag) -> float:
        vec = self.scaler.transform(self.embed(bag)[None, :])
        p = float(clamp_posterior(posterior_values(self.head, vec)[0], self.epsilon))
        return min(p / (1.0 - p), MAX_ODDS)


def train_embed_classifier(
    ds: MILDataset,
    embedding: str,
    head: str,
    hyper: dict,
    seed: int = 0,
) -> EmbedModel:
    """Fit embedding artifacts on training bags only, then train a head.

    hyper keys: svm head takes C and degree (poly kernel degree, default
    1); knn head takes k; bow additionally takes words; miles optionally
    takes sigma (default: median instance distance heuristic).
    """
    if embedding not in EMBEDDINGS:
        raise ValueError(f"unknown embedding {embedding!r}")
    if head not in ("svm", "knn"):
        raise ValueError(f"unknown head {head!r}")
    labels = ds.labels()
    if not (np.any(labels == 1) and np.any(labels == -1)):
        raise ValueError("training data must contain both bag classes")

    model = EmbedModel(embedding=embedding, head=None, scaler=Standardizer())
    if embedding == "bow":
        X, _ = ds.stacked_instances()
        model.codebook = build_codebook(X, W=int(hyper["words"]), seed=seed)
    elif embedding == "miles":
        X, _ = ds.stacked_instances()
        model.miles_prototypes = X.copy()
        sigma = hyper.get("sigma")
        model.miles_sigma = (
            float(sigma) if sigma is not None else median_instance_distance(X)
        )
    elif embedding in ("dissim_meanmin", "dissim_emd"):
        model.prototype_set = PrototypeSet(
            bags=ds.bags, measure=embedding.removeprefix("dissim_")
        )

    E = np.stack([model.embed(bag) for bag in ds.bags])
    Es = model.scaler.fit_transform(E)
    if head == "svm":
        kernel = PolyKernel(degree=int(hyper.get("degree", 1)))
        model.head = train_svm(Es, labels, kernel=kernel, C=float(hyper.get("C", 1.0)))
    else:
        model.head = train_knn(Es, labels, k=int(hyper.get("k", 1)))
    return model
