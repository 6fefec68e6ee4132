"""Embedding quality and run-to-run consistency measures."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateError, DimensionError, LabelError, ParamError

__all__ = [
    "trustworthiness",
    "silhouette_samples",
    "silhouette",
    "knn_accuracy",
    "procrustes_align",
    "procrustes_distance",
    "ProcrustesMatrix",
    "procrustes_matrix",
    "MetricsReport",
]

_CHUNK = 512


def _pair(X, Y):
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise DimensionError(f"point counts differ: {X.shape[0]} vs {Y.shape[0]}")
    return X, Y


def trustworthiness(X, Y, k: int = 5, sample_size: int | None = None, seed: int = 0) -> float:
    """Rank-based penalty for embedding neighbors that were not data neighbors.

    ``T = 1 - 2 / (m k (2N - 3k - 1)) * sum_i sum_{j in NN_Y(i)} max(0, r(i, j) - k)``
    where ``r(i, j)`` is the 1-based rank of ``j`` among ``i``'s data-space
    neighbors and ``m`` is the number of anchors.  With ``sample_size`` set,
    ``m`` anchors are drawn uniformly (seeded) while ranks still range over
    all points.  Ties in either space are broken by index.
    """
    X, Y = _pair(X, Y)
    n = X.shape[0]
    if int(k) != k or k < 1 or not k < n / 2:
        raise ParamError(f"k must be an integer with 1 <= k < N/2, got k={k}, N={n}")
    if sample_size is None or sample_size >= n:
        anchors = np.arange(n)
    else:
        if sample_size < 1:
            raise ParamError("sample_size must be >= 1")
        anchors = np.sort(np.random.default_rng(seed).choice(n, size=sample_size, replace=False))
    m = anchors.size
    penalty = 0.0
    for start in range(0, m, _CHUNK):
        rows = anchors[start : start + _CHUNK]
        r = np.arange(rows.size)
        DX = cdist(X[rows], X)
        DX[r, rows] = np.inf
        order = np.argsort(DX, axis=1, kind="stable")
        ranks = np.empty_like(order)
        np.put_along_axis(ranks, order, np.arange(1, n + 1)[None, :], axis=1)
        DY = cdist(Y[rows], Y)
        DY[r, rows] = np.inf
        nn_y = np.argsort(DY, axis=1, kind="stable")[:, :k]
        rk = np.take_along_axis(ranks, nn_y, axis=1)
        penalty += float(np.maximum(0, rk - k).sum())
    return 1.0 - 2.0 * penalty / (m * k * (2.0 * n - 3.0 * k - 1.0))


def _check_labels(Y, labels):
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    labels = np.asarray(labels)
    if labels.shape != (Y.shape[0],):
        raise DimensionError(f"expected {Y.shape[0]} labels, got shape {labels.shape}")
    uniq, inv, counts = np.unique(labels, return_inverse=True, return_counts=True)
    if uniq.size < 2:
        raise LabelError("silhouette needs at least 2 distinct labels")
    if np.any(counts < 2):
        raise LabelError(f"label(s) {uniq[counts < 2].tolist()} have a single member")
    return Y, inv, counts


def silhouette_samples(Y, labels) -> np.ndarray:
    """Pointwise ``(b_i - a_i) / max(a_i, b_i)`` with the 0/0 case mapped to 0."""
    Y, inv, counts = _check_labels(Y, labels)
    n, n_lab = Y.shape[0], counts.size
    onehot = np.zeros((n, n_lab))
    onehot[np.arange(n), inv] = 1.0
    sums = np.empty((n, n_lab))
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        sums[start:stop] = cdist(Y[start:stop], Y) @ onehot
    own = sums[np.arange(n), inv]
    a = own / (counts[inv] - 1)
    means = sums / counts[None, :]
    means[np.arange(n), inv] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    return s


def silhouette(Y, labels) -> float:
    """Mean silhouette over every point (no sampling), Euclidean distances."""
    return float(silhouette_samples(Y, labels).mean())


def knn_accuracy(Y_train, labels_train, Y_test, labels_test, k: int = 10) -> float:
    """Fraction of test points whose k-NN majority label is correct.

    Vote ties go to the smallest label; neighbor ties to the lower index.
    """
    Y_train = np.atleast_2d(np.asarray(Y_train, dtype=np.float64))
    Y_test = np.atleast_2d(np.asarray(Y_test, dtype=np.float64))
    labels_train = np.asarray(labels_train)
    labels_test = np.asarray(labels_test)
    if labels_train.shape != (Y_train.shape[0],) or labels_test.shape != (Y_test.shape[0],):
        raise DimensionError("label counts do not match point counts")
    if Y_train.shape[1] != Y_test.shape[1]:
        raise DimensionError("train and test dimensions differ")
    if int(k) != k or not 1 <= k <= Y_train.shape[0]:
        raise ParamError(f"k must be in [1, {Y_train.shape[0]}], got {k}")
    uniq, inv = np.unique(labels_train, return_inverse=True)
    correct = 0
    for start in range(0, Y_test.shape[0], _CHUNK):
        stop = min(start + _CHUNK, Y_test.shape[0])
        nn = np.argsort(cdist(Y_test[start:stop], Y_train), axis=1, kind="stable")[:, :k]
        votes = np.zeros((stop - start, uniq.size), dtype=np.int64)
        np.add.at(votes, (np.repeat(np.arange(stop - start), k), inv[nn].ravel()), 1)
        pred = uniq[np.argmax(votes, axis=1)]  # argmax returns the first, i.e. smallest, label
        correct += int((pred == labels_test[start:stop]).sum())
    return correct / Y_test.shape[0]


# ---------------------------------------------------------------------------
# Procrustes


def _normalise(A):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    A = A - A.mean(axis=0)
    norm = np.linalg.norm(A)
    if norm == 0 or not math.isfinite(norm):
        raise DegenerateError("point cloud has zero spread")
    return A / norm


def procrustes_align(A, B) -> tuple[np.ndarray, np.ndarray, float]:
    """Normalise both clouds and rotate/reflect/scale ``B`` onto ``A``.

    Returns ``(A_normalised, B_aligned, distance)``.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise DimensionError(f"clouds differ in shape: {A.shape} vs {B.shape}")
    A0, B0 = _normalise(A), _normalise(B)
    U, s, Vt = np.linalg.svd(B0.T @ A0)
    R = U @ Vt
    scale = float(s.sum())
    B1 = scale * (B0 @ R)
    resid = float(np.sum((A0 - B1) ** 2))
    # analytically resid = 1 - scale**2; guard the sign of tiny round-off
    return A0, B1, math.sqrt(max(resid, 0.0))


def procrustes_distance(A, B) -> float:
    """Residual norm after optimally aligning two unit-normalised clouds.

    Translation, scaling, rotation and reflection are all factored out.
    Symmetric in its arguments and bounded by 1.
    """
    return procrustes_align(A, B)[2]


@dataclass(frozen=True)
class ProcrustesMatrix:
    """Pairwise distances among runs; the diagonal holds distances to the reference."""

    M: np.ndarray
    order: np.ndarray
    mean: float
    std: float

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.M).copy()

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        for row in self.M.tolist():
            w.writerow([repr(v) for v in row])
        fh.write(f"# {self.mean!r},{self.std!r}\n")


def procrustes_matrix(reference, runs) -> ProcrustesMatrix:
    """Sorted-diagonal Procrustes matrix and its lower-triangle mean/std.

    Runs are ordered by ascending distance to ``reference`` (remaining ties by
    ascending total distance to the other runs) so the output does not depend
    on input order.
    """
    runs = [np.asarray(r, dtype=np.float64) for r in runs]
    if not runs:
        raise ParamError("need at least one run")
    R = len(runs)
    to_ref = np.array([procrustes_distance(reference, r) for r in runs])
    P = np.zeros((R, R))
    for i in range(R):
        for j in range(i):
            P[i, j] = P[j, i] = procrustes_distance(runs[i], runs[j])
    order = np.lexsort((P.sum(axis=1), to_ref))
    # recompute in sorted order: p_d is symmetric only to rounding
    M = np.zeros((R, R))
    for i in range(R):
        for j in range(i):
            M[i, j] = M[j, i] = procrustes_distance(runs[order[i]], runs[order[j]])
    M[np.diag_indices(R)] = to_ref[order]
    lower = M[np.tril_indices(R, -1)]
    if lower.size:
        mean = float(lower.mean())
        std = float(np.sqrt(np.mean((lower - mean) ** 2)))
    else:
        mean = std = math.nan
    return ProcrustesMatrix(M, order, mean, std)


@dataclass
class MetricsReport:
    trustworthiness: float | None = None
    silhouette: float | None = None
    knn_accuracy: float | None = None
    params: dict = field(default_factory=dict)
