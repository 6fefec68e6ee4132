"""High-dimensional affinity structures.

Exact Euclidean k-NN, fuzzy k-NN affinities with per-point bandwidth
calibration, t-conorm symmetrisation, and the near / mid-near / further pair
sets used by PaCMAP-style optimisation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .errors import DataError, ParamError, RangeError

__all__ = [
    "Dataset",
    "KnnIndex",
    "DirectedAffinities",
    "AffinityGraph",
    "PacmapPairs",
    "exact_knn",
    "smooth_knn_sigma",
    "umap_affinities",
    "tconorm",
    "symmetrize_tconorm",
    "fuzzy_graph",
    "pacmap_pairs",
]

_CHUNK = 512


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 2:
            raise DataError(f"need an N x n matrix with N >= 2, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("dataset contains non-finite entries")
        object.__setattr__(self, "X", X)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (X.shape[0],):
                raise DataError(f"expected {X.shape[0]} labels, got {labels.shape}")
            object.__setattr__(self, "labels", labels.astype(np.int64))

    @property
    def n_points(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class KnnIndex:
    """Neighbor ids and distances, one row per point, ascending distance."""

    indices: np.ndarray
    distances: np.ndarray

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    @property
    def n_points(self) -> int:
        return self.indices.shape[0]


def _as_matrix(X) -> np.ndarray:
    return X.X if isinstance(X, Dataset) else Dataset(X).X


def exact_knn(X, k: int) -> KnnIndex:
    """Exact Euclidean k-NN by a full pairwise scan.

    The point itself is excluded; ties are broken by the lower index.
    """
    X = _as_matrix(X)
    n = X.shape[0]
    if int(k) != k or k < 1 or k >= n:
        raise ParamError(f"k must be an integer in [1, {n - 1}], got {k}")
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k), dtype=np.float64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        D = cdist(X[start:stop], X)
        D[np.arange(stop - start), np.arange(start, stop)] = np.inf
        order = np.argsort(D, axis=1, kind="stable")[:, :k]
        idx[start:stop] = order
        dist[start:stop] = np.take_along_axis(D, order, axis=1)
    return KnnIndex(idx, dist)


# ---------------------------------------------------------------------------
# fuzzy affinities


@dataclass(frozen=True)
class DirectedAffinities:
    """Directed weights ``p_{i|j}`` aligned with ``knn.indices``."""

    indices: np.ndarray
    weights: np.ndarray
    rho: np.ndarray
    sigma: np.ndarray
    degenerate: np.ndarray

    @property
    def n_points(self) -> int:
        return self.indices.shape[0]

    @property
    def k(self) -> int:
        return self.indices.shape[1]


_SIGMA_LO = 1e-12
_SIGMA_HI = 1e12
_SIGMA_ITERS = 64
_SIGMA_TOL = 1e-5


def smooth_knn_sigma(dists: np.ndarray, target: float) -> tuple[float, float, bool]:
    """Bandwidth ``sigma`` with ``sum_j exp(-(d_j - rho) / sigma) = target``.

    ``dists`` is one point's ascending neighbor distances.  Bisection runs on
    the geometric midpoint of ``[1e-12, 1e12]`` for 64 iterations.  Returns
    ``(rho, sigma, degenerate)``; a point is degenerate when every neighbor
    sits at ``rho`` (no sigma can move the sum), when ``rho == 0`` (duplicate
    points), or when the target is not reached within ``1e-5``.
    """
    rho = float(dists[0])
    excess = dists - rho
    if not np.any(excess > 0):
        return rho, math.sqrt(_SIGMA_LO * _SIGMA_HI), True
    lo, hi = _SIGMA_LO, _SIGMA_HI
    for _ in range(_SIGMA_ITERS):
        mid = math.sqrt(lo * hi)
        total = float(np.exp(-excess / mid).sum())
        if abs(total - target) < 1e-12:
            break
        if total > target:
            hi = mid
        else:
            lo = mid
    sigma = math.sqrt(lo * hi)
    total = float(np.exp(-excess / sigma).sum())
    return rho, sigma, bool(abs(total - target) >= _SIGMA_TOL or rho == 0.0)


def umap_affinities(knn: KnnIndex, k: int | None = None) -> DirectedAffinities:
    """Calibrated directed weights ``p_{i|j} = exp(-(d_ij - rho_i) / sigma_i)``.

    ``rho_i`` is the nearest-neighbor distance, so the nearest neighbor always
    has weight 1, and ``sigma_i`` makes each row sum to ``log2(k)``.
    """
    if k is None:
        k = knn.k
    if k != knn.k:
        raise ParamError(f"knn was built with k={knn.k}, got k={k}")
    target = math.log2(k)
    n = knn.n_points
    rho = np.empty(n)
    sigma = np.empty(n)
    degenerate = np.zeros(n, dtype=bool)
    for i in range(n):
        rho[i], sigma[i], degenerate[i] = smooth_knn_sigma(knn.distances[i], target)
    weights = np.exp(-(knn.distances - rho[:, None]) / sigma[:, None])
    return DirectedAffinities(knn.indices.copy(), weights, rho, sigma, degenerate)


@dataclass(frozen=True)
class AffinityGraph:
    """Undirected weighted edges stored once each with ``head < tail``."""

    head: np.ndarray
    tail: np.ndarray
    weight: np.ndarray
    n_points: int
    k: int
    rho: np.ndarray
    sigma: np.ndarray
    degenerate: np.ndarray

    @property
    def n_edges(self) -> int:
        return self.head.shape[0]

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "p"])
        for i, j, p in zip(self.head.tolist(), self.tail.tolist(), self.weight.tolist()):
            w.writerow([i, j, repr(p)])

    def to_sparse(self) -> sp.csr_matrix:
        n = self.n_points
        upper = sp.coo_matrix((self.weight, (self.head, self.tail)), shape=(n, n))
        return (upper + upper.T).tocsr()


def tconorm(p, q):
    """Probabilistic sum ``p + q - p q``."""
    return p + q - p * q


def symmetrize_tconorm(directed: DirectedAffinities) -> AffinityGraph:
    """Merge ``p_{i|j}`` and ``p_{j|i}`` into one undirected weight per pair."""
    w = directed.weights
    if np.any(~np.isfinite(w)) or np.any(w < 0) or np.any(w > 1):
        raise RangeError("directed weights must lie in [0, 1]")
    n, k = directed.indices.shape
    rows = np.repeat(np.arange(n), k)
    P = sp.coo_matrix((w.ravel(), (rows, directed.indices.ravel())), shape=(n, n)).tocsr()
    P.sum_duplicates()
    S = (P + P.T - P.multiply(P.T)).tocoo()
    keep = (S.row < S.col) & (S.data > 0)
    order = np.lexsort((S.col[keep], S.row[keep]))
    head = S.row[keep][order].astype(np.int64)
    tail = S.col[keep][order].astype(np.int64)
    weight = np.minimum(S.data[keep][order], 1.0)
    return AffinityGraph(head, tail, weight, n, k, directed.rho, directed.sigma, directed.degenerate)


def fuzzy_graph(X, k: int = 15) -> AffinityGraph:
    """k-NN, calibration and symmetrisation in one call."""
    return symmetrize_tconorm(umap_affinities(exact_knn(X, k), k))


# ---------------------------------------------------------------------------
# PaCMAP pair sets


@dataclass(frozen=True)
class PacmapPairs:
    """Partner ids per anchor row: near, mid-near and further pairs."""

    near: np.ndarray
    mid: np.ndarray
    far: np.ndarray
    sigma: np.ndarray

    @staticmethod
    def _edges(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n, m = block.shape
        return np.repeat(np.arange(n), m), block.ravel()

    def near_edges(self):
        return self._edges(self.near)

    def mid_edges(self):
        return self._edges(self.mid)

    def far_edges(self):
        return self._edges(self.far)


def pacmap_pairs(X, n_nb: int = 10, n_mn: int = 5, n_fp: int = 20, seed: int = 0) -> PacmapPairs:
    """Self-tuned near pairs plus seeded mid-near and further pairs.

    ``sigma_i`` is the mean distance to the 4th-6th nearest neighbors and
    near pairs are the ``n_nb`` smallest ``||x_i - x_j||^2 / (sigma_i sigma_j)``.
    Each mid-near partner is the second closest of 6 points drawn uniformly
    without replacement; further partners are uniform draws.  All three sets
    are disjoint per anchor.
    """
    X = _as_matrix(X)
    n = X.shape[0]
    for name, v in (("n_nb", n_nb), ("n_mn", n_mn), ("n_fp", n_fp)):
        if int(v) != v or v < 0:
            raise ParamError(f"{name} must be a non-negative integer, got {v}")
    if n_nb < 1 or n_nb + 1 >= n:
        raise ParamError(f"need 1 <= n_nb < N - 1, got n_nb={n_nb}, N={n}")
    if n < 7:
        raise ParamError("self-tuning scale needs at least 7 points")
    if n_nb + n_mn + n_fp > n - 1:
        raise ParamError(f"n_nb + n_mn + n_fp = {n_nb + n_mn + n_fp} exceeds the {n - 1} available partners")
    if n_mn and n - 1 - n_nb - (n_mn - 1) < 6:
        raise ParamError("too few candidates to draw 6 points per mid-near pair")

    knn6 = exact_knn(X, 6)
    sigma = knn6.distances[:, 3:6].mean(axis=1)
    sigma = np.where(sigma > 0, sigma, np.finfo(float).tiny)

    near = np.empty((n, n_nb), dtype=np.int64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        D2 = cdist(X[start:stop], X, "sqeuclidean") / np.outer(sigma[start:stop], sigma)
        D2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        near[start:stop] = np.argsort(D2, axis=1, kind="stable")[:, :n_nb]

    rng = np.random.default_rng(seed)
    mid = np.empty((n, n_mn), dtype=np.int64)
    far = np.empty((n, n_fp), dtype=np.int64)
    for i in range(n):
        taken = np.zeros(n, dtype=bool)
        taken[i] = True
        taken[near[i]] = True
        for m in range(n_mn):
            pool = np.flatnonzero(~taken)
            cand = rng.choice(pool, size=6, replace=False)
            d = np.sum((X[cand] - X[i]) ** 2, axis=1)
            pick = cand[np.argsort(d, kind="stable")[1]]
            mid[i, m] = pick
            taken[pick] = True
        if n_fp:
            pool = np.flatnonzero(~taken)
            far[i] = rng.choice(pool, size=n_fp, replace=False)
    return PacmapPairs(near, mid, far, sigma)
