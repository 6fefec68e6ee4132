"""Compiled per-epoch update loops for the negative-sampling optimizer."""

import numba
import numpy as np

from .shapes import modified_value


@numba.njit(cache=True)
def seed_rng(seed):
    np.random.seed(seed)


@numba.njit(cache=True, inline="always")
def _clipped(c, diff, clip):
    v = c * diff
    if v != v:  # inf * 0
        return 0.0
    if v > clip:
        return clip
    if v < -clip:
        return -clip
    return v


@numba.njit(cache=True)
def _attract(Y, i, j, code, p, scale, beta, shift, lam, clip):
    dim = Y.shape[1]
    sq = 0.0
    for d in range(dim):
        t = Y[i, d] - Y[j, d]
        sq += t * t
    if sq == 0.0 or lam == 0.0:
        return True
    z = np.sqrt(sq)
    c = lam * modified_value(code, p, scale, beta, shift, z)
    for d in range(dim):
        diff = Y[i, d] - Y[j, d]
        step = _clipped(c, diff, clip)
        Y[i, d] += step
        Y[j, d] -= step
    ok = True
    for d in range(dim):
        if not (np.isfinite(Y[i, d]) and np.isfinite(Y[j, d])):
            ok = False
    return ok


@numba.njit(cache=True)
def _repel(Y, i, j, code, p, scale, beta, shift, lam, clip):
    dim = Y.shape[1]
    sq = 0.0
    for d in range(dim):
        t = Y[i, d] - Y[j, d]
        sq += t * t
    if lam == 0.0:
        return True
    if sq == 0.0:
        Y[i, 0] += clip
        return np.isfinite(Y[i, 0])
    z = np.sqrt(sq)
    c = lam * modified_value(code, p, scale, beta, shift, z)
    for d in range(dim):
        Y[i, d] += _clipped(c, Y[i, d] - Y[j, d], clip)
    ok = True
    for d in range(dim):
        if not np.isfinite(Y[i, d]):
            ok = False
    return ok


@numba.njit(cache=True)
def run_epoch(
    Y,
    head,
    tail,
    period,
    next_fire,
    flip,
    epoch,
    a_code,
    a_p,
    a_mod,
    lam_a,
    r_code,
    r_p,
    r_mod,
    lam_r,
    n_neg,
    clip,
    m_head,
    m_tail,
    m_code,
    m_p,
    m_mod,
    lam_m,
):
    """One epoch of edge-by-edge updates, applied in place.

    Returns the index of the first edge that produced a non-finite
    coordinate, or -1.  Mid-near edges report as ``n_edges + index``.
    """
    n = Y.shape[0]
    now = epoch + 1.0
    for e in range(head.shape[0]):
        if next_fire[e] > now:
            continue
        i = head[e]
        j = tail[e]
        if not _attract(Y, i, j, a_code, a_p, a_mod[0], a_mod[1], a_mod[2], lam_a, clip):
            return e
        # alternate the endpoint that receives negative samples
        anchor = j if flip[e] else i
        flip[e] = not flip[e]
        for _ in range(n_neg):
            k = np.random.randint(n)
            while k == anchor:
                k = np.random.randint(n)
            if not _repel(Y, anchor, k, r_code, r_p, r_mod[0], r_mod[1], r_mod[2], lam_r, clip):
                return e
        next_fire[e] += period[e]
    for e in range(m_head.shape[0]):
        if not _attract(Y, m_head[e], m_tail[e], m_code, m_p, m_mod[0], m_mod[1], m_mod[2], lam_m, clip):
            return head.shape[0] + e
    return -1


@numba.njit(cache=True, parallel=True)
def run_epoch_parallel(
    Y,
    head,
    tail,
    period,
    next_fire,
    flip,
    epoch,
    a_code,
    a_p,
    a_mod,
    lam_a,
    r_code,
    r_p,
    r_mod,
    lam_r,
    n_neg,
    clip,
    m_head,
    m_tail,
    m_code,
    m_p,
    m_mod,
    lam_m,
):
    """Race-tolerant variant of :func:`run_epoch`; edges run concurrently."""
    n = Y.shape[0]
    now = epoch + 1.0
    bad = 0
    for e in numba.prange(head.shape[0]):
        if next_fire[e] > now:
            continue
        i = head[e]
        j = tail[e]
        if not _attract(Y, i, j, a_code, a_p, a_mod[0], a_mod[1], a_mod[2], lam_a, clip):
            bad += 1
        anchor = j if flip[e] else i
        flip[e] = not flip[e]
        for _ in range(n_neg):
            k = np.random.randint(n)
            while k == anchor:
                k = np.random.randint(n)
            if not _repel(Y, anchor, k, r_code, r_p, r_mod[0], r_mod[1], r_mod[2], lam_r, clip):
                bad += 1
        next_fire[e] += period[e]
    for e in numba.prange(m_head.shape[0]):
        if not _attract(Y, m_head[e], m_tail[e], m_code, m_p, m_mod[0], m_mod[1], m_mod[2], lam_m, clip):
            bad += 1
    return -1 if bad == 0 else 0
