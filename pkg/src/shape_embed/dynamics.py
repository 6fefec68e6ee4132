"""Exact single-step dynamics for pairs, triplets and small t-SNE configurations.

These functions apply one update by hand and report the resulting change
in distance.  They serve as an independent reference for the stochastic
optimizer and for the closed-form contraction/expansion certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, ParamError

__all__ = [
    "PairState",
    "TripletState",
    "PairUpdate",
    "pair_attract_step",
    "pair_repel_step",
    "classify_pair_update",
    "trimap_f_a",
    "trimap_f_r",
    "trimap_h_a",
    "trimap_h_r",
    "trimap_h_r_printed",
    "trimap_step",
    "planar_triplet",
    "trimap_zeta1_min",
    "TsneExpansion",
    "tsne_repulsion_expansion",
    "tsne_repulsion_step",
]


@dataclass(frozen=True)
class PairState:
    y_i: np.ndarray
    y_j: np.ndarray
    lam: float

    def __post_init__(self):
        yi = np.atleast_1d(np.asarray(self.y_i, dtype=np.float64))
        yj = np.atleast_1d(np.asarray(self.y_j, dtype=np.float64))
        if yi.shape != yj.shape or yi.ndim != 1:
            raise DimensionError(f"points must be 1-D with equal length, got {yi.shape} and {yj.shape}")
        if not (np.all(np.isfinite(yi)) and np.all(np.isfinite(yj))):
            raise ParamError("coordinates must be finite")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ParamError(f"lambda must be finite and >= 0, got {self.lam}")
        object.__setattr__(self, "y_i", yi)
        object.__setattr__(self, "y_j", yj)


@dataclass(frozen=True)
class TripletState:
    zeta1: float
    zeta2: float
    cos_theta: float
    lam: float

    def __post_init__(self):
        if not (self.zeta1 > 0 and self.zeta2 > 0):
            raise ParamError("triplet distances must be > 0")
        if not abs(self.cos_theta) <= 1:
            raise ParamError(f"|cos theta| must be <= 1, got {self.cos_theta}")
        if not self.lam > 0:
            raise ParamError(f"lambda must be > 0, got {self.lam}")


class PairUpdate(str, Enum):
    CONTRACT = "Contract"
    COINCIDE = "Coincide"
    FIXED = "Fixed"
    EXPAND_WITH_FLIP = "ExpandWithFlip"
    EXPAND_NO_FORCE_SENSE = "ExpandNoForceSense"


def pair_attract_step(s: PairState, f_a: float):
    """Move both endpoints of a positive edge.

    Returns ``(y_i', y_j', factor)`` with ``factor = |1 + 2 lam f_a|``, the
    exact ratio of new to old separation.
    """
    c = s.lam * f_a
    diff = s.y_i - s.y_j
    return s.y_i + c * diff, s.y_j - c * diff, abs(1.0 + 2.0 * c)


def pair_repel_step(s: PairState, f_r: float):
    """Move only ``y_i`` away from ``y_j``; factor is ``|1 + lam f_r|``."""
    c = s.lam * f_r
    return s.y_i + c * (s.y_i - s.y_j), s.y_j.copy(), abs(1.0 + c)


def classify_pair_update(lam: float, f_a: float) -> PairUpdate:
    """What one attractive step with effective coefficient ``lam * f_a`` does.

    Boundaries are compared exactly.
    """
    x = lam * f_a
    if x == 0.0 or x == -1.0:
        return PairUpdate.FIXED
    if x == -0.5:
        return PairUpdate.COINCIDE
    if x > 0.0:
        return PairUpdate.EXPAND_NO_FORCE_SENSE
    if x < -1.0:
        return PairUpdate.EXPAND_WITH_FLIP
    return PairUpdate.CONTRACT


# ---------------------------------------------------------------------------
# TriMap


def trimap_f_a(zeta1: float, zeta2: float) -> float:
    s = 2.0 + zeta1 * zeta1 + zeta2 * zeta2
    return -2.0 * (1.0 + zeta2 * zeta2) / (s * s)


def trimap_f_r(zeta1: float, zeta2: float) -> float:
    s = 2.0 + zeta1 * zeta1 + zeta2 * zeta2
    return 2.0 * (1.0 + zeta1 * zeta1) / (s * s)


def trimap_h_a(t: TripletState) -> float:
    """Squared contraction ratio of the neighbor distance after one triplet step.

    The step contracts ``||y_i - y_j||`` exactly when the value is below 1.
    """
    la = t.lam * trimap_f_a(t.zeta1, t.zeta2)
    lr = t.lam * trimap_f_r(t.zeta1, t.zeta2)
    r = t.zeta2 / t.zeta1
    u = 1.0 + 2.0 * la
    return u * u + 2.0 * u * lr * r * t.cos_theta + lr * lr * r * r


def trimap_h_r(t: TripletState) -> float:
    """Squared expansion ratio of the far-point distance after one triplet step.

    Expansion of ``||y_i - y_k||`` happens exactly when the value exceeds 1.
    """
    la = t.lam * trimap_f_a(t.zeta1, t.zeta2)
    lr = t.lam * trimap_f_r(t.zeta1, t.zeta2)
    r = t.zeta1 / t.zeta2
    u = 1.0 + 2.0 * lr
    return u * u + 2.0 * la * u * r * t.cos_theta + la * la * r * r


def trimap_h_r_printed(t: TripletState) -> float:
    """Variant of :func:`trimap_h_r` whose cross term uses ``1 + lam f_r``.

    Kept only so the test report can show where it departs from the
    brute-force update; do not use it as a certificate.
    """
    la = t.lam * trimap_f_a(t.zeta1, t.zeta2)
    lr = t.lam * trimap_f_r(t.zeta1, t.zeta2)
    r = t.zeta1 / t.zeta2
    return (1.0 + 2.0 * lr) ** 2 + 2.0 * la * (1.0 + lr) * r * t.cos_theta + la * la * r * r


def planar_triplet(t: TripletState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Explicit points ``(y_i, y_j, y_k)`` in the plane realising ``t``."""
    sin = math.sqrt(max(0.0, 1.0 - t.cos_theta**2))
    y_i = np.zeros(2)
    y_j = y_i - t.zeta1 * np.array([1.0, 0.0])
    y_k = y_i - t.zeta2 * np.array([t.cos_theta, sin])
    return y_i, y_j, y_k


def trimap_step(y_i, y_j, y_k, lam: float):
    """Apply one coupled TriMap update to explicit points."""
    y_i, y_j, y_k = (np.asarray(v, dtype=np.float64) for v in (y_i, y_j, y_k))
    dij, dik = y_i - y_j, y_i - y_k
    z1, z2 = float(np.linalg.norm(dij)), float(np.linalg.norm(dik))
    fa, fr = trimap_f_a(z1, z2), trimap_f_r(z1, z2)
    return (
        y_i + lam * fa * dij + lam * fr * dik,
        y_j - lam * fa * dij,
        y_k - lam * fr * dik,
    )


def trimap_zeta1_min(zeta2: float, cos_theta: float, lam: float) -> float:
    """Minimum neighbor distance for contraction in a TriMap triplet.

    Scans ``h_a - 1`` on 1024 log-spaced points in ``[1e-6, 1e3]`` for the
    first crossing from expansion (``h_a >= 1``) to contraction, then refines
    ``|h_a - 1|`` by golden-section search inside that grid cell.  Returns 0
    when the step already contracts at the smallest grid distance.  If ``h_a``
    never crosses 1 the grid argmin of ``|h_a - 1|`` is refined instead.
    """
    if not (zeta2 > 0 and abs(cos_theta) <= 1 and lam > 0):
        raise ParamError("need zeta2 > 0, |cos theta| <= 1, lambda > 0")

    def dev(z1):
        return trimap_h_a(TripletState(z1, zeta2, cos_theta, lam)) - 1.0

    grid = np.logspace(-6, 3, 1024)
    vals = np.array([dev(z) for z in grid])
    if vals[0] < 0:
        return 0.0
    crossings = np.flatnonzero((vals[:-1] >= 0) & (vals[1:] < 0))
    if crossings.size:
        i = int(crossings[0])
        lo, hi = grid[i], grid[i + 1]
    else:
        i = int(np.argmin(np.abs(vals)))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    return _golden_min(lambda z: abs(dev(z)), lo, hi)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(fun, lo: float, hi: float, rtol: float = 1e-8, maxiter: int = 500) -> float:
    """Golden-section minimiser; stops when the bracket is below ``rtol * hi``."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(maxiter):
        if b - a <= rtol * b:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
    return c if fc < fd else d


# ---------------------------------------------------------------------------
# t-SNE repulsion


class TsneExpansion(NamedTuple):
    h: float
    expands: bool
    v: np.ndarray
    cos_theta: float
    Z: float


_TSNE_MAX_N = 1000


def _tsne_f_r(sq):
    return 2.0 / (1.0 + sq) ** 2


def _check_tsne_inputs(Y, W, i, j):
    Y = np.asarray(Y, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if Y.ndim != 2:
        raise DimensionError(f"Y must be 2-D, got shape {Y.shape}")
    n = Y.shape[0]
    if W.shape != (n, n):
        raise DimensionError(f"W must be {n}x{n}, got {W.shape}")
    if n > _TSNE_MAX_N:
        raise ParamError(f"at most {_TSNE_MAX_N} points, got {n}")
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise ParamError(f"need distinct indices in [0, {n}), got {i}, {j}")
    return Y, W


def _normaliser(Y):
    sq = ((Y[:, None, :] - Y[None, :, :]) ** 2).sum(-1)
    q = 1.0 / (1.0 + sq)
    np.fill_diagonal(q, 0.0)
    return sq, float(q.sum())


def tsne_repulsion_step(Y, W, i: int, j: int, lam: float):
    """Apply the repulsive t-SNE update of pair ``(i, j)`` to explicit points.

    ``y_i`` moves by ``c * sum_k f_r(z_ik) (y_i - y_k)`` and ``y_j`` by
    ``-c * sum_l f_r(z_lj) (y_l - y_j)`` with ``c = lam * W[i, j] / Z``.
    """
    Y, W = _check_tsne_inputs(Y, W, i, j)
    sq, Z = _normaliser(Y)
    c = lam * W[i, j] / Z
    fr = _tsne_f_r(sq)
    yi = Y[i] + c * (fr[i, :, None] * (Y[i] - Y)).sum(0)
    yj = Y[j] - c * (fr[:, j, None] * (Y - Y[j])).sum(0)
    return yi, yj


def tsne_repulsion_expansion(Y, W, i: int, j: int, lam: float) -> TsneExpansion:
    """Certificate for the repulsive t-SNE update of pair ``(i, j)``.

    With ``u = 1 + 2 c f_r(z_ij)`` the new difference is ``u (y_i - y_j) + v``,
    so the squared distance ratio is
    ``h = u^2 + 2 u |v| cos(theta) / z + |v|^2 / z^2``; the pair expands iff
    ``h > 1``.
    """
    Y, W = _check_tsne_inputs(Y, W, i, j)
    if not lam >= 0:
        raise ParamError(f"lambda must be >= 0, got {lam}")
    sq, Z = _normaliser(Y)
    c = lam * W[i, j] / Z
    fr = _tsne_f_r(sq)
    mask_k = np.ones(len(Y), dtype=bool)
    mask_k[[i, j]] = False
    v = c * ((fr[i, mask_k, None] * (Y[i] - Y[mask_k])).sum(0) + (fr[mask_k, j, None] * (Y[mask_k] - Y[j])).sum(0))
    diff = Y[i] - Y[j]
    z = float(np.linalg.norm(diff))
    if z == 0.0:
        raise ParamError("points i and j coincide")
    vn = float(np.linalg.norm(v))
    cos = float(diff @ v / (z * vn)) if vn > 0 else 0.0
    u = 1.0 + 2.0 * c * fr[i, j]
    h = u * u + 2.0 * u * vn * cos / z + vn * vn / (z * z)
    return TsneExpansion(float(h), bool(h > 1.0), v, cos, Z)
