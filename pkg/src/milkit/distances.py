"""Bag-to-bag dissimilarity measures and the Citation-kNN classifier.

Three measures: meanmin (average minimum squared instance distance,
asymmetric), the earth mover's distance between uniform empirical
distributions (exact transportation simplex), and the Hausdorff
distance (plain Euclidean).  A pairwise matrix helper with CSV export
feeds the dissimilarity-space methods.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .bags import Bag, MILDataset
from .scoring import TrainedModel, clamp_posterior, posterior_to_odds

MEASURES = ("meanmin", "emd", "hausdorff")


def _check_dims(Bi: Bag, Bj: Bag) -> None:
    if Bi.instances.shape[1] != Bj.instances.shape[1]:
        raise ValueError(
            f"dimension mismatch: {Bi.instances.shape[1]} vs {Bj.instances.shape[1]}"
        )


def dist_meanmin(Bi: Bag, Bj: Bag) -> float:
    """Mean over Bi's instances of the min squared distance into Bj.

    Asymmetric by design; callers that need symmetry should average the
    two directions themselves.
    """
    _check_dims(Bi, Bj)
    d2 = cdist(Bi.instances, Bj.instances, "sqeuclidean")
    return float(d2.min(axis=1).mean())


def dist_hausdorff(Bi: Bag, Bj: Bag) -> float:
    """max(max-min, max-min) over plain Euclidean instance distances."""
    _check_dims(Bi, Bj)
    d = cdist(Bi.instances, Bj.instances, "euclidean")
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


# ---------------------------------------------------------------------------
# Earth mover's distance: exact transportation simplex
# ---------------------------------------------------------------------------


@dataclass
class TransportPlan:
    """Optimal flows between two uniform empirical distributions."""

    flows: np.ndarray  # (n_i, n_j), nonnegative
    source_weights: np.ndarray  # 1/n_i each
    sink_weights: np.ndarray  # 1/n_j each

    def max_violation(self) -> float:
        """Largest absolute feasibility violation across all constraints."""
        neg = float(np.maximum(-self.flows, 0.0).max(initial=0.0))
        row = float(np.abs(self.flows.sum(axis=1) - self.source_weights).max())
        col = float(np.abs(self.flows.sum(axis=0) - self.sink_weights).max())
        tot = abs(float(self.flows.sum()) - 1.0)
        return max(neg, row, col, tot)

    def is_feasible(self, atol: float = 1e-9) -> bool:
        return self.max_violation() <= atol


def _northwest_corner(a: np.ndarray, b: np.ndarray):
    """Initial basic feasible solution with exactly m + n - 1 cells."""
    m, n = len(a), len(b)
    a_rem = a.copy()
    b_rem = b.copy()
    basis = []
    flows = {}
    i = j = 0
    while True:
        q = min(a_rem[i], b_rem[j])
        basis.append((i, j))
        flows[(i, j)] = max(q, 0.0)
        a_rem[i] -= q
        b_rem[j] -= q
        if i == m - 1 and j == n - 1:
            break
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif a_rem[i] <= b_rem[j]:
            i += 1
        else:
            j += 1
    return basis, flows


def _tree_duals(basis, cost, m, n):
    """Solve u_i + v_j = cost[i, j] over the spanning-tree basis."""
    rows_adj = [[] for _ in range(m)]
    cols_adj = [[] for _ in range(n)]
    for i, j in basis:
        rows_adj[i].append(j)
        cols_adj[j].append(i)
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    stack = [(True, 0)]
    while stack:
        is_row, idx = stack.pop()
        if is_row:
            for j in rows_adj[idx]:
                if np.isnan(v[j]):
                    v[j] = cost[idx, j] - u[idx]
                    stack.append((False, j))
        else:
            for i in cols_adj[idx]:
                if np.isnan(u[i]):
                    u[i] = cost[i, idx] - v[idx]
                    stack.append((True, i))
    return u, v


def _basis_cycle(basis, enter, m, n):
    """Unique cycle created by adding ``enter`` to the basis tree.

    Returns the cycle as a cell list starting with ``enter``; signs
    alternate +, -, +, ... along the list.
    """
    ei, ej = enter
    rows_adj = [[] for _ in range(m)]
    cols_adj = [[] for _ in range(n)]
    for i, j in basis:
        rows_adj[i].append(j)
        cols_adj[j].append(i)
    # BFS over the bipartite tree from row ei to column ej
    parent = {("r", ei): None}
    queue = [("r", ei)]
    target = ("c", ej)
    while queue:
        node = queue.pop(0)
        if node == target:
            break
        kind, idx = node
        nbrs = (
            [("c", j) for j in rows_adj[idx]]
            if kind == "r"
            else [("r", i) for i in cols_adj[idx]]
        )
        for nxt in nbrs:
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    path = []
    node = target
    while node is not None:
        path.append(node)
        node = parent[node]
    path.reverse()  # r(ei), c(j1), r(i1), ..., c(ej)
    cells = [enter]
    for a, b in zip(path, path[1:]):
        (ka, ia), (kb, ib) = a, b
        cells.append((ia, ib) if ka == "r" else (ib, ia))
    return cells


def _solve_transport(cost: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Exact balanced transportation problem via the simplex method.

    Entering variable: first cell in row-major order with negative
    reduced cost (Bland's rule, no cycling).  Leaving variable: the
    minus-cell with the smallest flow, ties to the lexicographically
    smallest cell.
    """
    m, n = cost.shape
    basis, flows = _northwest_corner(a, b)
    basic = set(basis)
    tol = 1e-11 * max(1.0, float(np.abs(cost).max()))
    max_pivots = 2000 + 200 * m * n
    optimal = False
    for _ in range(max_pivots):
        u, v = _tree_duals(basis, cost, m, n)
        reduced = cost - u[:, None] - v[None, :]
        for i, j in basic:
            reduced[i, j] = np.inf
        cands = np.argwhere(reduced < -tol)
        if len(cands) == 0:
            optimal = True
            break
        enter = (int(cands[0][0]), int(cands[0][1]))  # Bland: lowest index
        cycle = _basis_cycle(basis, enter, m, n)
        minus = cycle[1::2]
        theta = min(flows[c] for c in minus)
        leave = min(c for c in minus if flows[c] == theta)
        for k, c in enumerate(cycle):
            if k == 0:
                flows[c] = theta
            elif k % 2 == 0:
                flows[c] += theta
            else:
                flows[c] = max(flows[c] - theta, 0.0)
        flows.pop(leave)
        basis.remove(leave)
        basic.remove(leave)
        basis.append(enter)
        basic.add(enter)
    if not optimal:
        raise RuntimeError("transportation simplex hit the pivot limit")
    F = np.zeros((m, n))
    for (i, j), q in flows.items():
        F[i, j] = q
    return F


def dist_emd(Bi: Bag, Bj: Bag) -> tuple[float, TransportPlan]:
    """Earth mover's distance between uniform empirical distributions.

    Ground distance is the squared Euclidean instance distance.  The
    marginal constraints bind as equalities at optimality because the
    total flow is fixed at 1, so the solver treats them as equalities.
    Exact to LP optimality (reduced costs checked on exit).
    """
    _check_dims(Bi, Bj)
    m, n = Bi.n_instances, Bj.n_instances
    cost = cdist(Bi.instances, Bj.instances, "sqeuclidean")
    a = np.full(m, 1.0 / m)
    b = np.full(n, 1.0 / n)
    F = _solve_transport(cost, a, b)
    plan = TransportPlan(flows=F, source_weights=a, sink_weights=b)
    return float((F * cost).sum()), plan


# ---------------------------------------------------------------------------
# Pairwise matrices
# ---------------------------------------------------------------------------


@dataclass
class DistanceMatrix:
    values: np.ndarray
    row_ids: list[str]
    col_ids: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.row_ids), len(self.col_ids)):
            raise ValueError("matrix shape does not match id lists")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("distance matrix contains non-finite values")

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bag_id"] + list(self.col_ids))
            for rid, row in zip(self.row_ids, self.values):
                writer.writerow([rid] + [format(v, ".17g") for v in row])


def measure_fn(measure: str):
    if measure == "meanmin":
        return dist_meanmin
    if measure == "emd":
        return lambda Bi, Bj: dist_emd(Bi, Bj)[0]
    if measure == "hausdorff":
        return dist_hausdorff
    raise ValueError(f"unknown measure {measure!r}; choose from {MEASURES}")


def pairwise_matrix(A, B, measure: str) -> DistanceMatrix:
    """All bag-to-bag distances between two bag lists.

    Entries are independent pure-function evaluations, so the result
    does not depend on evaluation order.
    """
    fn = measure_fn(measure)
    A = list(A)
    B = list(B)
    values = np.empty((len(A), len(B)))
    for i, Bi in enumerate(A):
        for j, Bj in enumerate(B):
            values[i, j] = fn(Bi, Bj)
    return DistanceMatrix(
        values=values, row_ids=[b.id for b in A], col_ids=[b.id for b in B]
    )


# ---------------------------------------------------------------------------
# Citation-kNN
# ---------------------------------------------------------------------------


@dataclass
class CitationKnnModel(TrainedModel):
    """References-and-citers voting over Hausdorff bag distances."""

    train_bags: tuple[Bag, ...]
    train_labels: np.ndarray
    kR: int
    kC: int
    train_dist: np.ndarray  # precomputed train-to-train Hausdorff
    epsilon: float = 1e-12

    def positive_fraction(self, bag: Bag) -> float:
        d = np.array([dist_hausdorff(bag, tb) for tb in self.train_bags])
        order = np.argsort(d, kind="stable")  # ties toward the lowest index
        votes = list(self.train_labels[order[: self.kR]])
        if self.kC > 0:
            n = len(self.train_bags)
            for t in range(n):
                others = np.delete(self.train_dist[t], t)
                # training bags win distance ties against the query
                rank = int(np.sum(others <= d[t]))
                if rank < self.kC:
                    votes.append(self.train_labels[t])
        votes = np.array(votes)
        return float(np.mean(votes == 1))

    def score(self, bag: Bag) -> float:
        frac = self.positive_fraction(bag)
        return posterior_to_odds(float(clamp_posterior(frac, self.epsilon)))


def train_citation_knn(ds: MILDataset, kR: int, kC: int) -> CitationKnnModel:
    """Fit by memorizing bags and the train-to-train Hausdorff matrix.

    A query is scored by the positive fraction among its kR nearest
    training bags plus every training bag that would place the query
    among its own kC nearest neighbours.
    """
    if len(ds.bags) == 0:
        raise ValueError("citation-kNN needs a nonempty training set")
    n = len(ds.bags)
    if not 1 <= kR <= n:
        raise ValueError(f"kR must be in [1, {n}]")
    if not 0 <= kC <= n:
        raise ValueError(f"kC must be in [0, {n}]")
    labels = ds.labels()
    train_dist = pairwise_matrix(ds.bags, ds.bags, "hausdorff").values
    return CitationKnnModel(
        train_bags=ds.bags,
        train_labels=labels,
        kR=int(kR),
        kC=int(kC),
        train_dist=train_dist,
    )
