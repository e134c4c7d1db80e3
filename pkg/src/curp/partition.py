"""Request partitioning by normalized-cut spectral clustering.

Two requests are similar when one user can serve both (little time overlap
after transfer) and moving between them is cheap. Similarity feeds a
normalized-cut relaxation whose eigenvector embedding is rounded by k-means.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from .model import RegionGrid, Request

# additive floor in the similarity denominator: caps alpha at 10, so a same-region,
# non-overlapping pair is not infinitely tighter than a cheap, nearby one
EPSILON = 0.1
DEFAULT_BETA = 1.0


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True)
class KMeansConfig:
    restarts: int = 10
    max_iter: int = 100
    seed: int = 0


@dataclass(frozen=True)
class SimilarityMatrix:
    W: np.ndarray
    L: np.ndarray
    beta: float
    theta: np.ndarray
    gamma: np.ndarray


@dataclass(frozen=True)
class Partitioning:
    """``assignment[n]`` is the partition of the n-th request (list order)."""

    assignment: tuple
    count: int

    def members(self, r: int) -> list:
        return [n for n, a in enumerate(self.assignment) if a == r]

    def groups(self) -> list:
        return [self.members(r) for r in range(self.count)]


def _ordered(vi: Request, vj: Request):
    return (vi, vj) if (vi.end, vi.start, vi.id) <= (vj.end, vj.start, vj.id) else (vj, vi)


def overlap_degree(vi: Request, vj: Request, grid: RegionGrid) -> float:
    """1 - (e_j - max(s_j, e_i + q_ij))^+ / (e_j - s_j), with the earlier-ending request first.

    0 means one user can serve v_i and then all of v_j; 1 means v_j's window
    is over by the time the user gets there. A zero-length later window
    counts as fully overlapping.
    """
    a, b = _ordered(vi, vj)
    span = b.end - b.start
    if span <= 0:
        return 1.0
    free = max(b.end - max(b.start, a.end + grid.q(a.region, b.region)), 0)
    return float(min(max(1.0 - free / span, 0.0), 1.0))


def connectivity_degree(vi: Request, vj: Request, grid: RegionGrid) -> float:
    pmax = grid.p_max
    if pmax <= 0:
        return 0.0
    a, b = _ordered(vi, vj)
    return grid.p(a.region, b.region) / pmax


def similarity_matrix(requests, grid: RegionGrid, beta: float = DEFAULT_BETA,
                      eps: float = EPSILON) -> SimilarityMatrix:
    if beta < 0:
        raise ValueError("beta must be >= 0")
    n = len(requests)
    theta = np.zeros((n, n))
    gamma = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            theta[a, b] = theta[b, a] = overlap_degree(requests[a], requests[b], grid)
            gamma[a, b] = gamma[b, a] = connectivity_degree(requests[a], requests[b], grid)
    W = 1.0 / (theta + beta * gamma + eps)
    np.fill_diagonal(W, 0.0)
    L = W.sum(axis=1)
    if n == 1:
        # a lone request has no neighbours; give it unit volume
        L = np.ones(1)
    return SimilarityMatrix(W, L, float(beta), theta, gamma)


def normalized_cut_value(assignment, W, L) -> float:
    """sum_r cut(D_r, rest) / vol(D_r); empty partitions contribute 0."""
    a = np.asarray(assignment)
    W = np.asarray(W, dtype=float)
    L = np.asarray(L, dtype=float)
    if L.ndim == 2:
        L = np.diag(L)
    total = 0.0
    for r in np.unique(a):
        e = (a == r).astype(float)
        vol = float(e @ L)
        if vol <= 0:
            continue
        total += float(e @ (L * e) - e @ W @ e) / vol
    return total


def _sign_fix(vecs):
    # flip each eigenvector so its largest-magnitude entry (first on ties) is positive
    for k in range(vecs.shape[1]):
        v = vecs[:, k]
        idx = int(np.argmax(np.abs(v) > np.abs(v).max() - 1e-12))
        if v[idx] < 0:
            vecs[:, k] = -v
    return vecs


def spectral_embedding(W, L, J: int):
    """Smallest J eigenpairs of I - L^-1/2 W L^-1/2 and the row-normalized embedding."""
    W = np.asarray(W, dtype=float)
    L = np.asarray(L, dtype=float)
    n = W.shape[0]
    if J > n:
        raise ValueError(f"cannot split {n} requests into {J} partitions")
    if np.any(L <= 0):
        raise SpectralError("similarity matrix has a row with zero volume")
    d = 1.0 / np.sqrt(L)
    M = np.eye(n) - (d[:, None] * W * d[None, :])
    M = (M + M.T) / 2
    try:
        vals, vecs = scipy.linalg.eigh(M, driver="evr", subset_by_index=[0, J - 1])
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SpectralError(f"eigen-solver failed on {n}x{n} matrix "
                            f"(min volume {L.min():.3g}, max volume {L.max():.3g}): {exc}") from exc
    vecs = _sign_fix(vecs.copy())
    # ascending eigenvalue, ties by eigenvector entries
    order = np.lexsort(tuple(vecs[::-1, :]) + (np.round(vals, 12),))
    vals, vecs = vals[order], vecs[:, order]
    E = d[:, None] * vecs
    norms = np.linalg.norm(E, axis=1)
    rows = norms > 0
    E[rows] = E[rows] / norms[rows, None]
    return vals, E


def kmeans_labels(X, J: int, config: KMeansConfig = KMeansConfig()) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if J == 1 or len(X) == 0:
        return np.zeros(len(X), dtype=int)
    with warnings.catch_warnings():
        # fewer distinct points than clusters: accept fewer partitions
        warnings.simplefilter("ignore", ConvergenceWarning)
        km = KMeans(n_clusters=J, init="k-means++", n_init=config.restarts,
                    max_iter=config.max_iter, random_state=config.seed, algorithm="lloyd")
        return km.fit_predict(X)


def relabel(labels) -> Partitioning:
    """Renumber partitions 0..m-1 in order of first appearance."""
    mapping = {}
    out = []
    for lab in labels:
        lab = int(lab)
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out.append(mapping[lab])
    return Partitioning(tuple(out), len(mapping))


def spectral_partition(W, L, J: int, config: KMeansConfig = KMeansConfig()) -> Partitioning:
    n = np.asarray(W).shape[0]
    if J < 1 or J > n:
        raise ValueError(f"need 1 <= J <= I, got J={J}, I={n}")
    if J == 1:
        return Partitioning(tuple([0] * n), 1)
    _, E = spectral_embedding(W, L, J)
    return relabel(kmeans_labels(E, J, config))


def eigen_lower_bound(W, L, J: int) -> float:
    vals, _ = spectral_embedding(W, L, J)
    return float(vals.sum())


# ---------------------------------------------------------------------------
# dispatch


def _user_partition_distance(users, groups, requests, grid: RegionGrid) -> np.ndarray:
    """Mean distance from each user's start to the requests of each partition.

    Euclidean between region centers when the grid has them, moving cost otherwise.
    """
    D = np.zeros((len(users), len(groups)))
    for r, members in enumerate(groups):
        regs = [requests[n].region for n in members]
        for u, user in enumerate(users):
            if grid.centers is not None:
                diff = grid.centers[regs] - grid.centers[user.start_region]
                D[u, r] = float(np.mean(np.sqrt((diff ** 2).sum(axis=1))))
            else:
                D[u, r] = float(np.mean(grid.moving_cost[user.start_region, regs]))
    return D


def dispatch_users(users, partitioning: Partitioning, requests, grid: RegionGrid,
                   mode: str = "matching") -> dict:
    """Map partition index -> user index (position in ``users``).

    ``matching`` (default) is a one-to-one minimum-total-distance assignment.
    ``nearest`` sends each user to its closest partition independently; a
    partition chosen by several users keeps the closest of them and
    partitions nobody chose stay unserved.
    """
    groups = [g for g in partitioning.groups()]
    live = [r for r, g in enumerate(groups) if g]
    if not live or not users:
        return {}
    D = _user_partition_distance(users, [groups[r] for r in live], requests, grid)
    if mode == "matching":
        if len(live) > len(users):
            raise ValueError(f"{len(live)} partitions but only {len(users)} users")
        rows, cols = linear_sum_assignment(D)
        return {live[c]: int(u) for u, c in zip(rows, cols)}
    if mode == "nearest":
        out = {}
        for u in range(len(users)):
            c = int(np.argmin(D[u]))
            r = live[c]
            if r not in out or D[u, c] < D[out[r], c]:
                out[r] = u
        return out
    raise ValueError(f"unknown dispatch mode {mode!r}")
