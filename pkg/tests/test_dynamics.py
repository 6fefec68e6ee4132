import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shape_embed.dynamics import (
    PairState,
    PairUpdate,
    TripletState,
    classify_pair_update,
    pair_attract_step,
    pair_repel_step,
    planar_triplet,
    trimap_f_a,
    trimap_f_r,
    trimap_h_a,
    trimap_h_r,
    trimap_h_r_printed,
    trimap_step,
    trimap_zeta1_min,
    tsne_repulsion_expansion,
    tsne_repulsion_step,
)
from shape_embed.errors import DimensionError, ParamError
from shape_embed.shapes import ShapeKind, ShapeSpec, eval_shape


def _ulp_error(new_i, new_j, old_i, old_j, factor):
    """Worst per-coordinate gap between the new difference and factor * old difference.

    The new difference is taken exactly from the returned floats; the gap is
    measured in ulps of the largest magnitude involved.
    """
    worst = 0.0
    old = old_i - old_j
    scale = max(np.abs(np.concatenate([new_i, new_j, old_i, old_j])).max(), 1e-300)
    ulp = math.ulp(scale)
    for d in range(old.size):
        exact_new = Fraction(float(new_i[d])) - Fraction(float(new_j[d]))
        want = Fraction(factor) * Fraction(float(old[d]))
        worst = max(worst, abs(float(exact_new - want)) / ulp)
    return worst


class TestPairSteps:
    def test_attract_example(self):
        s = PairState(np.array([1.0, 0.0]), np.array([-1.0, 0.0]), 1.0)
        yi, yj, k = pair_attract_step(s, -0.25)
        np.testing.assert_array_equal(yi, [0.5, 0.0])
        np.testing.assert_array_equal(yj, [-0.5, 0.0])
        assert k == 0.5

    def test_attract_coincide(self):
        s = PairState(np.array([1.0, 2.0]), np.array([-3.0, 0.5]), 0.5)
        yi, yj, k = pair_attract_step(s, -1.0)
        assert k == 0.0
        np.testing.assert_array_equal(yi, yj)

    def test_attract_zero_force(self):
        s = PairState(np.array([1.0, 2.0]), np.array([0.0, 0.5]), 0.7)
        yi, yj, k = pair_attract_step(s, 0.0)
        np.testing.assert_array_equal(yi, s.y_i)
        np.testing.assert_array_equal(yj, s.y_j)
        assert k == 1.0

    def test_repel_examples(self):
        s = PairState(np.array([1.0, 0.0]), np.array([0.0, 0.0]), 1.0)
        yi, yj, k = pair_repel_step(s, 0.5)
        np.testing.assert_array_equal(yi, [1.5, 0.0])
        np.testing.assert_array_equal(yj, [0.0, 0.0])
        assert k == 1.5
        assert pair_repel_step(s, 1.0)[2] == 2.0
        yi, _, k = pair_repel_step(s, 0.0)
        np.testing.assert_array_equal(yi, s.y_i)
        assert k == 1.0

    def test_factor_law_within_four_ulp(self):
        rng = np.random.default_rng(3)
        worst_a = worst_r = 0.0
        for n in range(10_000):
            d = (1, 2, 3, 10)[n % 4]
            s = PairState(rng.normal(size=d) * 10 ** rng.uniform(-2, 2), rng.normal(size=d), float(rng.uniform(0, 1)))
            fa, fr = -float(rng.uniform(0, 3)), float(rng.uniform(0, 3))
            yi, yj, k = pair_attract_step(s, fa)
            assert k == abs(1 + 2 * s.lam * fa)
            worst_a = max(worst_a, _ulp_error(yi, yj, s.y_i, s.y_j, 1 + 2 * s.lam * fa))
            yi, yj, k = pair_repel_step(s, fr)
            assert k == abs(1 + s.lam * fr)
            worst_r = max(worst_r, _ulp_error(yi, yj, s.y_i, s.y_j, 1 + s.lam * fr))
        assert worst_a <= 4 and worst_r <= 4

    def test_rejects_non_finite(self):
        with pytest.raises(ParamError):
            PairState(np.array([np.nan]), np.array([0.0]), 1.0)


class TestClassification:
    @pytest.mark.parametrize(
        "x,want",
        [
            (-0.3, PairUpdate.CONTRACT),
            (-0.5, PairUpdate.COINCIDE),
            (-1.0, PairUpdate.FIXED),
            (0.0, PairUpdate.FIXED),
            (-1.2, PairUpdate.EXPAND_WITH_FLIP),
            (0.2, PairUpdate.EXPAND_NO_FORCE_SENSE),
            (-0.5 + 1e-16, PairUpdate.CONTRACT),
            (-1.0 - 2e-16, PairUpdate.EXPAND_WITH_FLIP),
        ],
    )
    def test_boundaries(self, x, want):
        assert classify_pair_update(1.0, x) is want

    @settings(max_examples=200, deadline=None)
    @given(lam=st.floats(0.01, 2), fa=st.floats(-5, 1))
    def test_agrees_with_factor(self, lam, fa):
        c = classify_pair_update(lam, fa)
        k = abs(1 + 2 * Fraction(lam * fa))  # exact, so tiny forces do not round to 1
        if c is PairUpdate.CONTRACT:
            assert k < 1
        elif c is PairUpdate.COINCIDE:
            assert k == 0
        elif c is PairUpdate.FIXED:
            assert k == 1
        else:
            assert k > 1

    def test_localmap_contracts_inside_sqrt_c_minus_one(self):
        spec = ShapeSpec("LocalMapAR", {"K": 10, "C": 10})
        for z in np.linspace(0.01, 6, 300):
            c = classify_pair_update(1.0, eval_shape(spec, z))
            if z < 3:
                assert c is PairUpdate.CONTRACT
            elif z > 3:
                assert c is PairUpdate.EXPAND_NO_FORCE_SENSE


class TestRepulsionExpands:
    @settings(max_examples=300, deadline=None)
    @given(
        kind=st.sampled_from([k for k in ShapeKind if k.role == "repulsion"]),
        z=st.floats(0.01, 5),
        lam=st.floats(1e-3, 1.0),
    )
    def test_factor_above_one(self, kind, z, lam):
        f = eval_shape(ShapeSpec(kind), z)
        assert f > 0
        _, _, k = pair_repel_step(PairState(np.array([z]), np.array([0.0]), lam), f)
        assert k > 1


def _triplet_ratio(t):
    y_i, y_j, y_k = planar_triplet(t)
    ni, nj, nk = trimap_step(y_i, y_j, y_k, t.lam)
    return np.sum((ni - nj) ** 2) / t.zeta1**2, np.sum((ni - nk) ** 2) / t.zeta2**2


class TestTrimap:
    def test_planar_triplet_geometry(self):
        t = TripletState(1.3, 0.4, -0.2, 1.0)
        y_i, y_j, y_k = planar_triplet(t)
        assert np.linalg.norm(y_i - y_j) == pytest.approx(1.3)
        assert np.linalg.norm(y_i - y_k) == pytest.approx(0.4)
        cos = (y_i - y_j) @ (y_i - y_k) / (1.3 * 0.4)
        assert cos == pytest.approx(-0.2)

    def test_reference_point_matches_brute_force(self):
        t = TripletState(1.0, 0.5, 1.0, 1.0)
        ra, rr = _triplet_ratio(t)
        assert trimap_h_a(t) == pytest.approx(ra, rel=1e-10)
        assert trimap_h_r(t) == pytest.approx(rr, rel=1e-10)

    def test_alternative_cross_term_disagrees(self):
        # the (1 + lam f_r) cross-term variant is not the squared distance ratio
        t = TripletState(1.0, 0.5, 1.0, 1.0)
        _, rr = _triplet_ratio(t)
        assert abs(trimap_h_r_printed(t) - rr) > 0.1

    def test_cos_zero_form(self):
        t = TripletState(0.8, 1.7, 0.0, 0.6)
        la, lr = t.lam * trimap_f_a(0.8, 1.7), t.lam * trimap_f_r(0.8, 1.7)
        assert trimap_h_a(t) == pytest.approx((1 + 2 * la) ** 2 + (lr * 1.7 / 0.8) ** 2, rel=1e-14)

    def test_far_point_limit(self):
        for cos in (-1.0, 0.0, 1.0):
            t = TripletState(1.0, 1e4, cos, 1.0)
            assert trimap_h_a(t) == pytest.approx(1.0, abs=1e-6)

    @settings(max_examples=500, deadline=None)
    @given(
        z1=st.floats(1e-2, 10),
        z2=st.floats(1e-2, 10),
        cos=st.floats(-1, 1),
        lam=st.floats(0.05, 5),
    )
    def test_certificates_match_brute_force(self, z1, z2, cos, lam):
        t = TripletState(z1, z2, cos, lam)
        ra, rr = _triplet_ratio(t)
        assert trimap_h_a(t) == pytest.approx(ra, rel=1e-9, abs=1e-12)
        assert trimap_h_r(t) == pytest.approx(rr, rel=1e-9, abs=1e-12)

    def test_zeta1_min_is_root(self):
        for z2, cos, lam in ((0.5, 1.0, 1.0), (1.0, 0.0, 1.0), (2.0, -0.5, 2.0), (0.3, 0.5, 0.5)):
            z1 = trimap_zeta1_min(z2, cos, lam)
            if z1 > 0:
                assert abs(trimap_h_a(TripletState(z1, z2, cos, lam)) - 1) < 1e-6

    def test_zeta1_min_varies_with_zeta2(self):
        vals = {trimap_zeta1_min(z2, 0.0, 1.0) for z2 in (0.1, 0.5, 1.0, 2.0)}
        assert len(vals) > 1

    def test_zeta1_min_small_lambda(self):
        assert trimap_zeta1_min(0.5, 0.0, 1e-6) < 1e-3

    def test_invalid(self):
        with pytest.raises(ParamError):
            TripletState(1.0, 1.0, 1.5, 1.0)
        with pytest.raises(ParamError):
            TripletState(0.0, 1.0, 0.0, 1.0)


class TestTsne:
    def test_collinear_three_points(self):
        Y = np.array([[0.0, 0.0], [1.0, 0.0], [2.5, 0.0]])
        W = np.ones((3, 3))
        res = tsne_repulsion_expansion(Y, W, 0, 1, 1.0)
        yi, yj = tsne_repulsion_step(Y, W, 0, 1, 1.0)
        assert res.h == pytest.approx(np.sum((yi - yj) ** 2), rel=1e-10)

    def test_brute_force_updates_independently(self):
        # loops, not vectorised, to keep the oracle separate from the library
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(3, 9))
            Y = rng.normal(size=(n, 2))
            W = rng.uniform(size=(n, n))
            i, j = (int(v) for v in rng.choice(n, 2, replace=False))
            lam = float(rng.uniform(0.1, 50))
            Z = sum(1 / (1 + np.sum((Y[a] - Y[b]) ** 2)) for a in range(n) for b in range(n) if a != b)
            c = lam * W[i, j] / Z
            fr = lambda a, b: 2 / (1 + np.sum((Y[a] - Y[b]) ** 2)) ** 2  # noqa: E731
            yi = Y[i] + c * sum(fr(i, k) * (Y[i] - Y[k]) for k in range(n) if k != i)
            yj = Y[j] + c * sum(fr(m, j) * (Y[j] - Y[m]) for m in range(n) if m != j)
            ratio = np.sum((yi - yj) ** 2) / np.sum((Y[i] - Y[j]) ** 2)
            res = tsne_repulsion_expansion(Y, W, i, j, lam)
            assert res.h == pytest.approx(ratio, rel=1e-10)
            assert res.expands == (ratio > 1)

    def test_zero_weight(self):
        Y = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
        W = np.zeros((3, 3))
        res = tsne_repulsion_expansion(Y, W, 0, 1, 1.0)
        assert res.h == 1.0 and not res.expands

    def test_zero_rate(self):
        Y = np.random.default_rng(0).normal(size=(5, 2))
        res = tsne_repulsion_expansion(Y, np.ones((5, 5)), 1, 3, 0.0)
        assert res.h == 1.0 and not res.expands

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            tsne_repulsion_expansion(np.zeros((3, 2)), np.ones((4, 4)), 0, 1, 1.0)

    def test_size_cap(self):
        with pytest.raises(ParamError):
            tsne_repulsion_expansion(np.zeros((1001, 2)), np.ones((1001, 1001)), 0, 1, 1.0)
