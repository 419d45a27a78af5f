"""Supervised vector classifiers shared by the MIL methods.

Three base learners with one posterior interface: L2-regularized logistic
regression (Newton with backtracking), k-nearest-neighbour voting, and a
kernel SVM trained by SMO-style pairwise coordinate ascent.  Labels are
always {+1, -1}.

All learners expect standardized inputs; :class:`Standardizer` fits
per-feature statistics on the training split only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def sigmoid(z):
    z = np.clip(z, -700.0, 700.0)
    return 1.0 / (1.0 + np.exp(-z))


def _check_two_classes(y: np.ndarray) -> None:
    if not (np.any(y == 1) and np.any(y == -1)):
        raise ValueError("training data must contain both classes")


@dataclass
class Standardizer:
    """Per-feature zero-mean unit-variance scaling, fit on training data.

    Constant features get scale 1 so transforming never divides by zero.
    """

    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    def fit(self, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        std[std == 0.0] = 1.0
        self.scale = std
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def fit_transform(self, X: np.ndarray) -> np.ndarray:
        return self.fit(X).transform(X)


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    C: float
    loss_path: list[float] = field(default_factory=list, repr=False)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


def _logistic_objective(w, b, X, y, C):
    margins = y * (X @ w + b)
    # log(1 + exp(-m)) via logaddexp for stability
    nll = np.logaddexp(0.0, -margins).sum()
    return nll + 0.5 / C * float(w @ w)


def _logistic_gradient(w, b, X, y, C):
    margins = y * (X @ w + b)
    coef = -y * sigmoid(-margins)
    gw = X.T @ coef + w / C
    gb = coef.sum()
    return gw, gb


def train_logistic(X: np.ndarray, y: np.ndarray, C: float,
                   grad_tol: float = 1e-8, max_iter: int = 200) -> LogisticModel:
    """Minimize the L2-regularized logistic loss (penalty weight 1/C).

    Newton steps with Armijo backtracking; the bias is unpenalized, so on
    all-zero features the fitted posterior is exactly the class prior.
    Deterministic; converges to gradient norm well below 1e-6.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature values")
    _check_two_classes(y)
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    losses = [_logistic_objective(w, b, X, y, C)]
    for _ in range(max_iter):
        gw, gb = _logistic_gradient(w, b, X, y, C)
        gnorm = np.sqrt(gw @ gw + gb * gb)
        if gnorm <= grad_tol:
            break
        p = sigmoid(X @ w + b)
        s = p * (1.0 - p)
        # Hessian of [w; b] with ridge on w only; small damping keeps it SPD.
        Xw = X * s[:, None]
        H = np.empty((d + 1, d + 1))
        H[:d, :d] = X.T @ Xw + (1.0 / C + 1e-10) * np.eye(d)
        H[:d, d] = Xw.sum(axis=0)
        H[d, :d] = H[:d, d]
        H[d, d] = s.sum() + 1e-10
        g = np.concatenate([gw, [gb]])
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = g
        # Backtracking line search keeps the loss path monotone.
        t = 1.0
        f0 = losses[-1]
        descent = float(g @ step)
        for _ in range(60):
            w_new = w - t * step[:d]
            b_new = b - t * step[d]
            f_new = _logistic_objective(w_new, b_new, X, y, C)
            if f_new <= f0 - 1e-4 * t * descent:
                break
            t *= 0.5
        else:
            break
        w, b = w_new, b_new
        losses.append(f_new)
    return LogisticModel(weights=w, bias=float(b), C=float(C), loss_path=losses)


# ---------------------------------------------------------------------------
# k-nearest neighbours
# ---------------------------------------------------------------------------


@dataclass
class KnnModel:
    k: int
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.k < 1 or self.k > len(self.X):
            raise ValueError("k must satisfy 1 <= k <= number of reference vectors")


def train_knn(X: np.ndarray, y: np.ndarray, k: int) -> KnnModel:
    return KnnModel(k=int(k), X=np.asarray(X, dtype=float), y=np.asarray(y, dtype=int))


def _knn_posterior(model: KnnModel, x: np.ndarray) -> float:
    d2 = np.sum((model.X - x) ** 2, axis=1)
    order = np.argsort(d2, kind="stable")
    kth = d2[order[model.k - 1]]
    inner = d2 < kth
    boundary = d2 == kth
    # Points tied at the k-th distance share the remaining weight equally,
    # which keeps the posterior invariant to reference-set permutations.
    n_inner = int(inner.sum())
    pos_inner = int(np.sum(model.y[inner] == 1))
    n_tied = int(boundary.sum())
    pos_tied = int(np.sum(model.y[boundary] == 1))
    weight_tied = (model.k - n_inner) / n_tied
    return (pos_inner + pos_tied * weight_tied) / model.k


# ---------------------------------------------------------------------------
# Kernel SVM (SMO)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolyKernel:
    """(scale * <x, z> + offset)^degree; PSD for offset >= 0, scale > 0."""

    degree: int = 1
    scale: float = 1.0
    offset: float = 1.0

    def __call__(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        return (self.scale * (A @ B.T) + self.offset) ** self.degree


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i of the support vectors
    bias: float
    kernel: PolyKernel
    C: float
    alphas: np.ndarray = None  # full training alphas, kept for diagnostics
    train_labels: np.ndarray = None

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1] if self.support_vectors.size else 0


def train_svm(X: np.ndarray, y: np.ndarray, kernel: PolyKernel, C: float,
              tol: float = 1e-3, max_iter: int = 1_000_000) -> SvmModel:
    """Soft-margin kernel SVM via SMO pairwise coordinate ascent.

    The working pair is the maximally KKT-violating one; training stops
    when the violation falls below ``tol``.  Resulting alphas satisfy the
    box [0, C] and sum(alpha_i * y_i) = 0 to floating-point accuracy.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_two_classes(y)
    n = len(y)
    K = kernel(X, X)
    if not np.all(np.isfinite(K)):
        raise ValueError("kernel matrix contains non-finite values")
    Q = K * np.outer(y, y)

    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - sum(a)

    for _ in range(max_iter):
        up = ((y > 0) & (alpha < C - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        low = ((y > 0) & (alpha > 1e-12)) | ((y < 0) & (alpha < C - 1e-12))
        if not up.any() or not low.any():
            break
        viol = -y * grad
        viol_up = np.where(up, viol, -np.inf)
        viol_low = np.where(low, viol, np.inf)
        i = int(np.argmax(viol_up))
        j = int(np.argmin(viol_low))
        if viol_up[i] - viol_low[j] < tol:
            break
        eta = Q[i, i] + Q[j, j] - 2.0 * y[i] * y[j] * Q[i, j]
        if eta <= 1e-15:
            eta = 1e-12
        step = (viol_up[i] - viol_low[j]) / eta
        # Clip the step so both alphas stay inside the box.
        if y[i] > 0:
            step = min(step, C - alpha[i])
        else:
            step = min(step, alpha[i])
        if y[j] > 0:
            step = min(step, alpha[j])
        else:
            step = min(step, C - alpha[j])
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        grad += step * (Q[:, i] * y[i] - Q[:, j] * y[j])
    # Recompute the decision offsets from scratch to shed drift.
    f = K @ (alpha * y)
    free = (alpha > 1e-8) & (alpha < C - 1e-8)
    if free.any():
        b = float(np.mean(y[free] - f[free]))
    else:
        # KKT brackets the bias between the I_up and I_low extremes.
        up = ((y > 0) & (alpha < C - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        low = ((y > 0) & (alpha > 1e-12)) | ((y < 0) & (alpha < C - 1e-12))
        cand = y - f
        lo = cand[up].max() if up.any() else 0.0
        hi = cand[low].min() if low.any() else 0.0
        b = float((lo + hi) / 2.0)

    sv = alpha > 1e-10
    return SvmModel(
        support_vectors=X[sv].copy(),
        dual_coef=(alpha * y)[sv].copy(),
        bias=b,
        kernel=kernel,
        C=float(C),
        alphas=alpha,
        train_labels=y.astype(int),
    )


def svm_dual_objective(model: SvmModel, X: np.ndarray, y: np.ndarray) -> float:
    """Dual objective sum(a) - 1/2 a'Qa of the stored alphas."""
    K = model.kernel(X, X)
    ay = model.alphas * y
    return float(model.alphas.sum() - 0.5 * ay @ K @ ay)


def predict_decision(model: SvmModel, x: np.ndarray) -> float:
    """Signed decision value sum_i alpha_i y_i K(sv_i, x) + b."""
    x = np.asarray(x, dtype=float)
    if model.support_vectors.size == 0:
        return float(model.bias)
    if x.ndim == 1 and x.shape[0] != model.dim:
        raise ValueError(f"dimension mismatch: expected {model.dim}, got {x.shape[0]}")
    k = model.kernel(model.support_vectors, x.reshape(1, -1))[:, 0]
    return float(model.dual_coef @ k + model.bias)


def decision_values(model: SvmModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if model.support_vectors.size == 0:
        return np.full(X.shape[0], model.bias)
    k = model.kernel(X, model.support_vectors)
    return k @ model.dual_coef + model.bias


def predict_posterior(model, x: np.ndarray) -> float:
    """p(z=+1 | x) under the given model.

    Logistic: sigmoid of the linear score.  k-NN: fraction of positive
    neighbours.  SVM: fixed logistic link sigmoid(f(x)), which preserves
    the decision-value ranking.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(model, LogisticModel):
        if x.shape[-1] != model.dim:
            raise ValueError(f"dimension mismatch: expected {model.dim}, got {x.shape[-1]}")
        return float(sigmoid(model.weights @ x + model.bias))
    if isinstance(model, KnnModel):
        if x.shape[-1] != model.X.shape[1]:
            raise ValueError(
                f"dimension mismatch: expected {model.X.shape[1]}, got {x.shape[-1]}"
            )
        return float(_knn_posterior(model, x))
    if isinstance(model, SvmModel):
        return float(sigmoid(predict_decision(model, x)))
    raise TypeError(f"unsupported model type {type(model).__name__}")


def posterior_values(model, X: np.ndarray) -> np.ndarray:
    """Vectorized p(z=+1 | x) for a batch of rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(model, LogisticModel):
        return sigmoid(X @ model.weights + model.bias)
    if isinstance(model, SvmModel):
        return sigmoid(decision_values(model, X))
    if isinstance(model, KnnModel):
        return np.array([_knn_posterior(model, x) for x in X])
    raise TypeError(f"unsupported model type {type(model).__name__}")
