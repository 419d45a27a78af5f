"""Concept-assumption MIL methods.

These methods take the standard MIL rule literally: a bag is positive
iff it contains at least one instance from an (unknown) positive
concept region.  Implemented here:

* diverse density (DD) and its EM optimization EM-DD,
* miSVM, which imputes hidden instance labels under bag constraints,
* MILBoost, gradient boosting on a noisy-or bag likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .bags import Bag, MILDataset
from .fusion import FusionRule, propagate_labels
from .learners import (
    PolyKernel,
    Standardizer,
    SvmModel,
    decision_values,
    sigmoid,
    train_svm,
)
from .scoring import TrainedModel, clamp_posterior, posterior_to_odds

LOG_HALF = -0.6931471805599453


def _log1mexp(a):
    """log(1 - exp(a)) for a <= 0, stable at both ends."""
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    small = a < LOG_HALF
    with np.errstate(divide="ignore"):
        out[small] = np.log1p(-np.exp(a[small]))
        out[~small] = np.log(-np.expm1(a[~small]))
    return out


def _bag_starts(ds: MILDataset) -> np.ndarray:
    counts = np.array([bag.n_instances for bag in ds.bags])
    return np.concatenate([[0], np.cumsum(counts[:-1])]).astype(int)


@dataclass(frozen=True)
class ConceptPoint:
    """A location in instance space plus per-feature relevance scales."""

    t: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        s = np.asarray(self.s, dtype=float)
        if t.ndim != 1 or s.shape != t.shape:
            raise ValueError("t and s must be 1-D vectors of equal length")
        if not (np.isfinite(t).all() and np.isfinite(s).all()):
            raise ValueError("concept point must be finite")
        if np.any(s <= 0.0):
            raise ValueError("scales must be strictly positive")
        t.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "s", s)

    @property
    def dim(self) -> int:
        return self.t.shape[0]


def _scaled_sq_dists(X: np.ndarray, t: np.ndarray, s2: np.ndarray) -> np.ndarray:
    diff = X - t
    return (diff * diff) @ s2


def _log_dd(t, s2, X, starts, pos_bags) -> float:
    """log DD(t, s) over the stacked dataset; -inf allowed."""
    d = _scaled_sq_dists(X, t, s2)
    with np.errstate(divide="ignore"):
        log_q = np.log(-np.expm1(-d))  # log(1 - exp(-d)) per instance
    bag_log_q = np.add.reduceat(log_q, starts)
    return float(_log1mexp(bag_log_q[pos_bags]).sum() + bag_log_q[~pos_bags].sum())


def diverse_density(point: ConceptPoint, ds: MILDataset) -> float:
    """How well a concept location explains the bag labels, in [0, 1].

    Product over positive bags of (1 - prod_k (1 - exp(-||x_ik - t||^2_s)))
    times product over negative bags of prod_k (1 - exp(-||x_ik - t||^2_s)),
    with the squared distance scaled per feature by s_f^2.
    """
    X, _, _ = propagate_labels(ds)
    if ds.dim != point.dim:
        raise ValueError(f"dimension mismatch: bags {ds.dim}, point {point.dim}")
    starts = _bag_starts(ds)
    pos_bags = ds.labels() > 0
    return float(np.exp(_log_dd(point.t, point.s * point.s, X, starts, pos_bags)))


# ---------------------------------------------------------------------------
# EM-DD
# ---------------------------------------------------------------------------


def _ascend(fun_grad, theta, max_iter=200, tol=1e-8):
    """Backtracking gradient ascent; accepts only strict improvements."""
    f, g = fun_grad(theta)
    step = 1.0
    for _ in range(max_iter):
        if not np.all(np.isfinite(g)):
            break
        cand, fc, gc = None, f, None
        for _ in range(40):
            trial = theta + step * g
            ft, gt = fun_grad(trial)
            if np.isfinite(ft) and ft > f:
                cand, fc, gc = trial, ft, gt
                break
            step *= 0.5
        if cand is None:
            break
        gain = fc - f
        theta, f, g = cand, fc, gc
        step *= 1.3
        if gain < tol:
            break
    return theta, f


def _singleton_obj_grad(theta, reps, pos, d_dim):
    """DD restricted to one representative instance per bag.

    Positive bags contribute -dist, negative bags log(1 - exp(-dist)).
    theta packs [t, log s].
    """
    t, u = theta[:d_dim], theta[d_dim:]
    s2 = np.exp(np.clip(2.0 * u, -700.0, 700.0))
    diff = reps - t
    sq = diff * diff
    dist = np.maximum(sq @ s2, 1e-12)
    p = np.exp(-dist)
    q = np.maximum(-np.expm1(-dist), 1e-300)
    f = float(-dist[pos].sum() + np.log(q[~pos]).sum())
    coef = np.where(pos, -1.0, np.clip(p / q, 0.0, 1e12))
    g_t = -2.0 * s2 * (coef @ diff)
    g_u = 2.0 * s2 * (coef @ sq)
    return f, np.concatenate([g_t, g_u])


def _full_obj_grad(theta, X, starts, pos_bags, bag_index, d_dim):
    """log DD over all instances with its gradient in (t, log s)."""
    t, u = theta[:d_dim], theta[d_dim:]
    s2 = np.exp(np.clip(2.0 * u, -700.0, 700.0))
    diff = X - t
    sq = diff * diff
    dist = np.maximum(sq @ s2, 1e-12)
    p = np.exp(-dist)
    q = np.maximum(-np.expm1(-dist), 1e-300)
    log_q = np.log(q)
    bag_log_q = np.add.reduceat(log_q, starts)
    log_pos_term = _log1mexp(bag_log_q[pos_bags])
    f = float(log_pos_term.sum() + bag_log_q[~pos_bags].sum())

    # d(log DD)/d(dist): negative-bag instances p/q; positive-bag
    # instances -Q_i/(1 - Q_i) * p/q with Q_i = prod(1 - p).
    bag_ratio = np.zeros(len(starts))
    with np.errstate(over="ignore"):
        bag_ratio[pos_bags] = np.minimum(
            np.exp(bag_log_q[pos_bags] - log_pos_term), 1e12
        )
    pq = np.clip(p / q, 0.0, 1e12)
    inst_pos = pos_bags[bag_index]
    coef = np.where(inst_pos, -bag_ratio[bag_index] * pq, pq)
    coef = np.clip(coef, -1e12, 1e12)
    g_t = -2.0 * s2 * (coef @ diff)
    g_u = 2.0 * s2 * (coef @ sq)
    return f, np.concatenate([g_t, g_u])


@dataclass
class EmddModel(TrainedModel):
    """Fitted concept point; bag score is the nearest-instance response."""

    concept: ConceptPoint
    log_dd: float
    restarts_run: int
    epsilon: float = 1e-12

    def score(self, bag: Bag) -> float:
        s2 = self.concept.s * self.concept.s
        d = _scaled_sq_dists(bag.instances, self.concept.t, s2)
        p = float(np.exp(-d.min()))
        return posterior_to_odds(float(clamp_posterior(p, self.epsilon)))


def train_emdd(
    ds: MILDataset,
    init_fraction: float = 0.1,
    seed: int = 0,
    max_restarts: int | None = None,
    em_iters: int = 20,
    m_step_iters: int = 200,
    tol: float = 1e-8,
    polish_top: int = 5,
    epsilon: float = 1e-12,
) -> EmddModel:
    """EM optimization of diverse density.

    Each restart starts at a sampled positive-bag instance.  The E-step
    picks the most responsible (closest) instance per bag; the M-step
    runs gradient ascent on the singleton objective over (t, log s).  A
    step that lowers the full DD is rejected, so the DD path of every
    restart is nondecreasing.  The best few restarts get a final ascent
    on the full DD before the winner is chosen (ties break toward the
    lowest restart index).
    """
    if not 0.0 < init_fraction <= 1.0:
        raise ValueError("init_fraction must be in (0, 1]")
    X, y_inst, bag_index = propagate_labels(ds)
    labels = ds.labels()
    pos_bags = labels > 0
    if not pos_bags.any():
        raise ValueError("EM-DD needs at least one positive bag")
    starts = _bag_starts(ds)
    counts = np.array([bag.n_instances for bag in ds.bags])
    d_dim = ds.dim

    pos_inst = np.flatnonzero(y_inst > 0)
    n_init = max(1, math.ceil(init_fraction * len(pos_inst)))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(pos_inst, size=n_init, replace=False)
    if max_restarts is not None:
        chosen = chosen[:max_restarts]

    # Initial scale: make typical scaled distances O(1) so responses are
    # neither all ~1 nor all ~0 at the start.
    feat_var = float(X.var(axis=0).mean())
    s0 = 1.0 / math.sqrt(2.0 * d_dim * max(feat_var, 1e-12))
    u0 = np.full(d_dim, math.log(s0))

    def full_fg(theta):
        return _full_obj_grad(theta, X, starts, pos_bags, bag_index, d_dim)

    results = []
    for r_idx, inst_i in enumerate(chosen):
        theta = np.concatenate([X[inst_i], u0])
        cur_f, _ = full_fg(theta)
        prev_reps = None
        for _ in range(em_iters):
            s2 = np.exp(np.clip(2.0 * theta[d_dim:], -700.0, 700.0))
            dist = _scaled_sq_dists(X, theta[:d_dim], s2)
            reps = np.array(
                [s + int(np.argmin(dist[s : s + c])) for s, c in zip(starts, counts)]
            )
            if prev_reps is not None and np.array_equal(reps, prev_reps):
                break
            prev_reps = reps
            rep_X = X[reps]
            theta_new, _ = _ascend(
                lambda th: _singleton_obj_grad(th, rep_X, pos_bags, d_dim),
                theta,
                max_iter=m_step_iters,
                tol=tol,
            )
            new_f, _ = full_fg(theta_new)
            if new_f < cur_f:
                break  # reject the DD-decreasing step, keep the previous point
            gain = new_f - cur_f
            theta, cur_f = theta_new, new_f
            if gain < tol:
                break
        results.append((cur_f, r_idx, theta))

    # Final ascent on the full objective from the leading restarts.
    results.sort(key=lambda item: (-item[0], item[1]))
    polished = []
    for cur_f, r_idx, theta in results[: max(1, polish_top)]:
        theta2, f2 = _ascend(full_fg, theta, max_iter=m_step_iters, tol=tol)
        polished.append((f2, r_idx, theta2))
    best_f, _, best_theta = min(polished, key=lambda item: (-item[0], item[1]))

    concept = ConceptPoint(
        t=best_theta[:d_dim],
        s=np.exp(np.clip(best_theta[d_dim:], -350.0, 350.0)),
    )
    return EmddModel(
        concept=concept,
        log_dd=float(best_f),
        restarts_run=len(chosen),
        epsilon=epsilon,
    )


# ---------------------------------------------------------------------------
# miSVM
# ---------------------------------------------------------------------------


@dataclass
class MisvmModel(TrainedModel):
    """SVM over imputed instance labels; bag score fuses the posteriors."""

    svm: SvmModel
    scaler: Standardizer
    rule: FusionRule
    instance_labels: dict[str, np.ndarray]
    iterations: int
    converged: bool

    def score(self, bag: Bag) -> float:
        f = decision_values(self.svm, self.scaler.transform(bag.instances))
        return self.rule.fuse(sigmoid(f))


def train_misvm(
    ds: MILDataset,
    kernel: PolyKernel | None = None,
    C: float = 1.0,
    rule: FusionRule | None = None,
    max_iter: int = 50,
    svm_tol: float = 1e-3,
) -> MisvmModel:
    """Alternate SVM training and instance-label imputation.

    Instances start with their bag's label.  Each round retrains the SVM
    and relabels positive-bag instances by decision sign; a positive bag
    whose instances all went negative gets its max-decision instance
    flipped back, so the bag constraint always holds.  Negative-bag
    instances never change.  Stops on a fixed point or after max_iter.
    """
    kernel = kernel if kernel is not None else PolyKernel(degree=1)
    rule = rule if rule is not None else FusionRule("noisy_or")
    X, z0, bag_index = propagate_labels(ds)
    labels = ds.labels()
    if not (np.any(labels == 1) and np.any(labels == -1)):
        raise ValueError("miSVM needs both positive and negative bags")
    starts = _bag_starts(ds)
    counts = np.array([bag.n_instances for bag in ds.bags])
    pos_bag_idx = np.flatnonzero(labels > 0)

    scaler = Standardizer().fit(X)
    Xs = scaler.transform(X)
    z = z0.astype(float)

    svm = None
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        svm = train_svm(Xs, z, kernel=kernel, C=C, tol=svm_tol)
        f = decision_values(svm, Xs)
        new_z = z.copy()
        for b in pos_bag_idx:
            sl = slice(starts[b], starts[b] + counts[b])
            zb = np.where(f[sl] >= 0.0, 1.0, -1.0)
            if not np.any(zb > 0):
                zb[int(np.argmax(f[sl]))] = 1.0  # keep the bag constraint
            new_z[sl] = zb
        if np.array_equal(new_z, z):
            converged = True
            break
        z = new_z

    per_bag = {
        bag.id: z[starts[b] : starts[b] + counts[b]].astype(int)
        for b, bag in enumerate(ds.bags)
    }
    return MisvmModel(
        svm=svm,
        scaler=scaler,
        rule=rule,
        instance_labels=per_bag,
        iterations=iterations,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# MILBoost
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Stump:
    """One-feature threshold rule returning +/-1."""

    feature: int
    threshold: float
    polarity: float

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.polarity * np.where(X[:, self.feature] > self.threshold, 1.0, -1.0)


def milboost_log_likelihood(F, bag_labels, starts) -> float:
    """Bag log-likelihood of instance scores under noisy-or."""
    p = np.clip(sigmoid(np.asarray(F, dtype=float)), 1e-16, 1.0 - 1e-16)
    log_not = np.add.reduceat(np.log1p(-p), starts)  # log(1 - P_i)
    pos = np.asarray(bag_labels) > 0
    return float(_log1mexp(log_not[pos]).sum() + log_not[~pos].sum())


def milboost_weights(F, bag_labels, starts, bag_index) -> np.ndarray:
    """Instance weights: gradient of the bag log-likelihood in F.

    Positive bags: w_ik = p_ik (1 - P_i) / P_i.  Negative: w_ik = -p_ik.
    """
    p = np.clip(sigmoid(np.asarray(F, dtype=float)), 1e-16, 1.0 - 1e-16)
    log_not = np.add.reduceat(np.log1p(-p), starts)
    P = np.maximum(-np.expm1(log_not), 1e-300)
    pos = (np.asarray(bag_labels) > 0)[bag_index]
    Pi = P[bag_index]
    return np.where(pos, p * (1.0 - Pi) / Pi, -p)


def _best_stump(X, w, thresholds) -> tuple[Stump, float]:
    """Stump maximizing sum_i w_i h(x_i); deterministic tie order."""
    total = float(w.sum())
    best = None
    for f in range(X.shape[1]):
        col = X[:, f]
        # score of the +polarity stump at each threshold
        above = (col[:, None] > thresholds[f][None, :]).astype(float)
        plus = 2.0 * (w @ above) - total
        for k, sc in enumerate(plus):
            for pol, val in ((1.0, float(sc)), (-1.0, float(-sc))):
                if best is None or val > best[1] + 1e-15:
                    best = (Stump(f, float(thresholds[f][k]), pol), val)
    return best


@dataclass
class MilboostModel(TrainedModel):
    """Boosted stump ensemble scored by noisy-or over sigmoid responses."""

    stumps: list[Stump]
    alphas: list[float]
    rule: FusionRule
    likelihood_path: list[float] = field(default_factory=list, repr=False)
    first_round_weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def rounds(self) -> int:
        return len(self.stumps)

    def instance_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = np.zeros(X.shape[0])
        for stump, alpha in zip(self.stumps, self.alphas):
            F += alpha * stump.evaluate(X)
        return F

    def score(self, bag: Bag) -> float:
        return self.rule.fuse(sigmoid(self.instance_scores(bag.instances)))


def train_milboost(
    ds: MILDataset,
    rounds: int = 100,
    epsilon: float = 1e-12,
    n_thresholds: int = 32,
    alpha_max: float = 5.0,
) -> MilboostModel:
    """Gradient boosting on the noisy-or bag likelihood.

    Each round reweights instances by the likelihood gradient, fits the
    best decision stump to the weights, and line-searches the round
    weight.  Rounds that cannot increase the likelihood stop training
    early, so the recorded likelihood path is nondecreasing.
    """
    if not 1 <= rounds <= 100:
        raise ValueError("rounds must be in [1, 100]")
    X, _, bag_index = propagate_labels(ds)
    labels = ds.labels()
    if not (np.any(labels == 1) and np.any(labels == -1)):
        raise ValueError("MILBoost needs both positive and negative bags")
    starts = _bag_starts(ds)

    # Quantile threshold grid per feature, fixed before boosting.
    qs = (np.arange(n_thresholds) + 0.5) / n_thresholds
    thresholds = [np.quantile(X[:, f], qs) for f in range(X.shape[1])]

    F = np.zeros(X.shape[0])
    model = MilboostModel(
        stumps=[], alphas=[], rule=FusionRule("noisy_or", epsilon=epsilon)
    )
    cur_ll = milboost_log_likelihood(F, labels, starts)
    model.likelihood_path.append(cur_ll)

    for t in range(rounds):
        w = milboost_weights(F, labels, starts, bag_index)
        if not np.any(np.abs(w) > 0.0):
            break  # degenerate weights, keep the current ensemble
        stump, gain = _best_stump(X, w, thresholds)
        if gain <= 0.0:
            break  # no stump is an ascent direction
        h = stump.evaluate(X)
        res = minimize_scalar(
            lambda a: -milboost_log_likelihood(F + a * h, labels, starts),
            bounds=(0.0, alpha_max),
            method="bounded",
            options={"xatol": 1e-10},
        )
        alpha = float(res.x)
        new_ll = milboost_log_likelihood(F + alpha * h, labels, starts)
        if new_ll < cur_ll or alpha <= 0.0:
            break  # line search found no improvement
        F = F + alpha * h
        cur_ll = new_ll
        model.stumps.append(stump)
        model.alphas.append(alpha)
        model.likelihood_path.append(cur_ll)
        if t == 0:
            model.first_round_weights = milboost_weights(
                F, labels, starts, bag_index
            )
    return model
