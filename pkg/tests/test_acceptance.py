"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line (collected again in the terminal summary)
with the measured quantities and the runtime against its budget.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from shape_embed.dynamics import (
    PairState,
    PairUpdate,
    TripletState,
    classify_pair_update,
    pair_attract_step,
    pair_repel_step,
    trimap_h_a,
    trimap_h_r,
    tsne_repulsion_expansion,
)
from shape_embed.embedder import OptimizerConfig, Schedule, embed, init_pca, init_random, run_consistency, run_sweep
from shape_embed.graph import exact_knn, fuzzy_graph, umap_affinities
from shape_embed.metrics import procrustes_distance, silhouette, trustworthiness
from shape_embed.shapes import (
    CompositeSwitch,
    ConstShift,
    KernelFitConfig,
    LinearAdd,
    ShapeSpec,
    eval_shape,
    eval_shape_array,
    fit_ab,
    localmap_max_K,
    zeta_minus_one,
)

GRID = (0.01, 0.1, 0.5, 1.0)


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


# ---------------------------------------------------------------------------
# 1-6: closed forms, dynamics and graph calibration


def test_criterion_01_shape_constants(acceptance):
    with Clock() as clk:
        unit = {"a": 1.0, "b": 1.0}
        cases = [
            (eval_shape(ShapeSpec("UmapAttr", unit), 1.0), -1.0),
            (eval_shape(ShapeSpec("NegTsneAttr"), 0.0), -1.0),
            (eval_shape(ShapeSpec("NegTsneRep"), 0.0), 1.0),
            (eval_shape(ShapeSpec("PacmapFar"), 0.0), 0.5),
            (eval_shape(ShapeSpec("UmapAttr", unit, (LinearAdd(0.2),)), 10.0), -2 / 101 - 2),
            (eval_shape(ShapeSpec("SneAttr"), 3.7), -2.0),
        ]
        worst = max(abs(got - want) for got, want in cases)
        z = np.linspace(0.0, 1e3, 10**6)
        fa = eval_shape_array(ShapeSpec("NegTsneAttr"), z)
        fr = eval_shape_array(ShapeSpec("NegTsneRep"), z)
        bounds = fa.min() >= -1 and fa.max() <= 0 and fr.min() >= 0 and fr.max() <= 1
        k = localmap_max_K(10, 1)
    ok = worst < 1e-12 and bounds and abs(k - 13.444) <= 1e-3 and clk.elapsed < 1
    assert acceptance(1, "shape constants", ok, f"max example error {worst:.1e}, bounds {bounds}, K={k:.4f}",
                      clk.elapsed, 1)


def _ulps(new_i, new_j, old_i, old_j, factor):
    old = old_i - old_j
    unit = math.ulp(max(np.abs(np.concatenate([new_i, new_j, old_i, old_j])).max(), 1e-300))
    return max(
        abs(float(Fraction(float(new_i[d])) - Fraction(float(new_j[d])) - Fraction(factor) * Fraction(float(old[d]))))
        / unit
        for d in range(old.size)
    )


def test_criterion_02_pair_updates(acceptance):
    with Clock() as clk:
        rng = np.random.default_rng(2)
        worst = 0.0
        factor_ok = True
        for n in range(10_000):
            d = (1, 2, 3, 10)[n % 4]
            s = PairState(rng.normal(size=d) * 3, rng.normal(size=d), float(rng.uniform(0, 1)))
            fa, fr = -float(rng.uniform(0, 3)), float(rng.uniform(0, 3))
            yi, yj, k = pair_attract_step(s, fa)
            factor_ok &= k == abs(1 + 2 * s.lam * fa)
            worst = max(worst, _ulps(yi, yj, s.y_i, s.y_j, 1 + 2 * s.lam * fa))
            yi, yj, k = pair_repel_step(s, fr)
            factor_ok &= k == abs(1 + s.lam * fr)
            worst = max(worst, _ulps(yi, yj, s.y_i, s.y_j, 1 + s.lam * fr))
        bounds = (
            classify_pair_update(1.0, 0.0) is PairUpdate.FIXED
            and classify_pair_update(1.0, -0.5) is PairUpdate.COINCIDE
            and classify_pair_update(1.0, -1.0) is PairUpdate.FIXED
            and classify_pair_update(1.0, -0.25) is PairUpdate.CONTRACT
            and classify_pair_update(1.0, -1.5) is PairUpdate.EXPAND_WITH_FLIP
        )
    ok = factor_ok and worst <= 4 and bounds and clk.elapsed < 5
    assert acceptance(2, "pair update factors", ok, f"worst {worst:.2f} ulp, boundaries exact {bounds}",
                      clk.elapsed, 5)


def test_criterion_03_zeta_minus_one(acceptance):
    with Clock() as clk:
        unit = zeta_minus_one(ShapeSpec("UmapAttr", {"a": 1.0, "b": 1.0}), 1.0)
        path = [zeta_minus_one(ShapeSpec("UmapAttr"), lam) for lam in (1.0, 0.5, 0.25, 0.1)]
        neg = zeta_minus_one(ShapeSpec("NegTsneAttr"), 1.0)
    mono = all(x >= y for x, y in zip(path, path[1:]))
    ok = abs(unit - 1.0) <= 1e-9 and mono and neg == 0.0 and clk.elapsed < 1
    assert acceptance(3, "minimum contraction distance", ok,
                      f"unit={unit:.12f}, path={[round(v, 4) for v in path]}, NEG-t-SNE={neg}", clk.elapsed, 1)


def test_criterion_04_fit_ab(acceptance):
    with Clock() as clk:
        a, b = fit_ab(KernelFitConfig(0.1, 1.0))
    ok = abs(a / 1.58 - 1) <= 0.02 and abs(b / 0.89 - 1) <= 0.02 and clk.elapsed < 5
    assert acceptance(4, "kernel fit", ok, f"a={a:.4f}, b={b:.4f}", clk.elapsed, 5)


def _grad(fun, y, h=1e-6):
    out = np.empty_like(y)
    for d in range(y.size):
        e = np.zeros_like(y)
        e[d] = h
        out[d] = (fun(y + e) - fun(y - e)) / (2 * h)
    return out


def test_criterion_05_negtsne_equivalence(acceptance):
    with Clock() as clk:
        grid = np.logspace(-3, 3, 512)
        gen = {"a": 1.0, "b": 1.0, "gamma": 2.0}
        shape_err = max(
            float(np.max(np.abs(eval_shape_array(ShapeSpec(g, gen), grid) - eval_shape_array(ShapeSpec(n), grid))
                         / np.abs(eval_shape_array(ShapeSpec(n), grid))))
            for g, n in (("GeneralAttr", "NegTsneAttr"), ("GeneralRep", "NegTsneRep"))
        )

        def logsig(x):
            return -math.log1p(math.exp(-x))

        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(100):
            yi, yj = rng.normal(size=2) * 2, rng.normal(size=2) * 2
            z = float(np.linalg.norm(yi - yj))
            logq = lambda y: -math.log1p(np.sum((y - yj) ** 2))  # noqa: E731
            att = -_grad(lambda y: -logsig(logq(y)), yi)
            rep = _grad(lambda y: logsig(logq(y)) - logq(y), yi)
            fa, fr = eval_shape(ShapeSpec("NegTsneAttr"), z), eval_shape(ShapeSpec("NegTsneRep"), z)
            for f, fd in ((fa, att), (fr, rep)):
                worst = max(worst, float(np.max(np.abs(f * (yi - yj) - fd) / np.maximum(np.abs(fd), 1e-9))))
    ok = shape_err <= 1e-12 and worst <= 1e-5 and clk.elapsed < 5
    assert acceptance(5, "NEG-t-SNE equivalence", ok, f"shape rel err {shape_err:.1e}, loss FD rel err {worst:.1e}",
                      clk.elapsed, 5)


def test_criterion_06_graph_calibration(acceptance):
    with Clock() as clk:
        X = np.random.default_rng(6).normal(size=(500, 10))
        aff = umap_affinities(exact_knn(X, 15), 15)
        g = fuzzy_graph(X, 15)
        ok_rows = ~aff.degenerate
        row_err = float(np.max(np.abs(aff.weights.sum(axis=1)[ok_rows] - math.log2(15))))
        D = np.zeros((500, 500))
        for i in range(500):
            D[i, aff.indices[i]] = aff.weights[i]
        p, q = D[g.head, g.tail], D[g.tail, g.head]
        bounds = bool(np.all((np.maximum(p, q) <= g.weight + 1e-15) & (g.weight <= p + q + 1e-15)))
        formula = float(np.max(np.abs(g.weight - (p + q - p * q))))
    ok = row_err < 1e-5 and bounds and formula < 1e-15 and clk.elapsed < 10
    assert acceptance(6, "graph calibration", ok,
                      f"{int(ok_rows.sum())} nodes, max row error {row_err:.1e}, t-conorm bounds {bounds}",
                      clk.elapsed, 10)


# ---------------------------------------------------------------------------
# 7-10: experiments on the synthetic benchmark


@pytest.mark.slow
def test_criterion_07_embedding_quality(acceptance, bench):
    with Clock() as clk:
        cfg = OptimizerConfig()  # UMAP shapes, both rates annealed from 1.0, 500 epochs
        Y = embed(fuzzy_graph(bench, cfg.n_neighbors), cfg, init_pca(bench)).Y
        sil = silhouette(Y, bench.labels)
        tw = trustworthiness(bench.X, Y, 5)
    ok = sil >= 0.5 and tw >= 0.95 and clk.elapsed < 120
    assert acceptance(7, "embedding quality", ok, f"silhouette={sil:.3f} (>=0.5), trustworthiness={tw:.3f} (>=0.95)",
                      clk.elapsed, 120)


@pytest.mark.slow
def test_criterion_08_sweep_trends(acceptance, bench, bench_graph):
    with Clock() as clk:
        init = init_pca(bench)
        umap = run_sweep(bench, bench.labels, OptimizerConfig(), GRID, GRID, graph=bench_graph, init=init)
        best_umap = max(umap, key=lambda r: r.silhouette)
        neg = run_sweep(bench, bench.labels,
                        OptimizerConfig(attraction=ShapeSpec("NegTsneAttr"), repulsion=ShapeSpec("NegTsneRep")),
                        GRID, GRID, graph=bench_graph, init=init)
        neg_best = max(r.silhouette for r in neg)
        neg_one = next(r.silhouette for r in neg if r.lambda_a == 1.0 and r.lambda_r == 1.0)
        # with one force switched off nothing should organise the random start into clusters
        rand = init_random(bench.n_points, 2, 10.0, seed=0)
        zero = {}
        for name, la, lr in (("lambda_a=0", 0.0, 1.0), ("lambda_r=0", 1.0, 0.0)):
            cfg = OptimizerConfig(schedule_a=Schedule.constant(la), schedule_r=Schedule.constant(lr))
            zero[name] = silhouette(embed(bench_graph, cfg, rand).Y, bench.labels)
    ok = (best_umap.lambda_a <= 0.5 and neg_one >= 0.85 * neg_best and all(v < 0.1 for v in zero.values())
          and clk.elapsed < 1800)
    detail = (f"UMAP best at lambda_a={best_umap.lambda_a}, lambda_r={best_umap.lambda_r}; "
              f"NEG-t-SNE (1,1) {neg_one:.3f} vs best {neg_best:.3f} ({neg_one / neg_best:.0%}); "
              + ", ".join(f"{k} silhouette {v:.3f}" for k, v in zero.items()))
    assert acceptance(8, "sweep trends", ok, detail, clk.elapsed, 1800)


def _standard_error(a, b, n):
    return math.sqrt((a.std**2 + b.std**2) / n)


@pytest.mark.slow
def test_criterion_09_consistency(acceptance, bench, bench_graph):
    R = 10
    n_pairs = R * (R - 1) // 2
    with Clock() as clk:
        modified = ShapeSpec("UmapAttr", modifiers=(LinearAdd(0.2),))
        composite = ShapeSpec("UmapAttr", modifiers=(LinearAdd(0.2), CompositeSwitch(ShapeSpec("UmapAttr"), 101)))
        res = {
            name: run_consistency(bench, OptimizerConfig(attraction=shape), R, seed0=0, graph=bench_graph).matrix
            for name, shape in (("default", ShapeSpec("UmapAttr")), ("modified", modified), ("composite", composite))
        }
    d = res["default"]
    checks = []
    for name in ("modified", "composite"):
        m = res[name]
        checks.append(d.mean - m.mean > _standard_error(d, m, n_pairs))
    ok = all(checks) and clk.elapsed < 1800
    detail = ", ".join(f"{k} {v.mean:.3f}+-{v.std:.3f}" for k, v in res.items())
    detail += "; gaps vs SE: " + ", ".join(
        f"{k} {d.mean - res[k].mean:.3f}/{_standard_error(d, res[k], n_pairs):.3f}" for k in ("modified", "composite"))
    assert acceptance(9, "consistency", ok, detail, clk.elapsed, 1800)


def _centroids(Y, labels):
    return np.array([Y[labels == c].mean(axis=0) for c in np.unique(labels)])


def _inter_centroid(Y, labels):
    C = _centroids(Y, labels)
    iu = np.triu_indices(len(C), 1)
    return float(np.linalg.norm(C[:, None] - C[None], axis=-1)[iu].mean())


def _intra_radius(Y, labels):
    return float(np.mean([np.linalg.norm(Y[labels == c] - Y[labels == c].mean(0), axis=1).mean()
                          for c in np.unique(labels)]))


@pytest.mark.slow
def test_criterion_10_repulsion_trends(acceptance, bench, bench_graph):
    with Clock() as clk:
        init = init_pca(bench)
        inter = []
        for eps in (0.0, 1e-3, 1e-2):
            rep = ShapeSpec("UmapRep", modifiers=(ConstShift(eps),) if eps else ())
            inter.append(_inter_centroid(embed(bench_graph, OptimizerConfig(repulsion=rep), init).Y, bench.labels))
        radius_default = _intra_radius(embed(bench_graph, OptimizerConfig(), init).Y, bench.labels)
        cfg_b = OptimizerConfig(repulsion=ShapeSpec("UmapRep", {"b": 0.4}))
        radius_b = _intra_radius(embed(bench_graph, cfg_b, init).Y, bench.labels)
    mono = all(x <= y for x, y in zip(inter, inter[1:]))
    ok = mono and radius_b < radius_default and clk.elapsed < 1200
    assert acceptance(10, "repulsion trends", ok,
                      f"inter-centroid {[round(v, 2) for v in inter]}, radius b=0.4 {radius_b:.3f} "
                      f"vs default {radius_default:.3f}", clk.elapsed, 1200)


# ---------------------------------------------------------------------------
# 11-12: metric and certificate oracles


def test_criterion_11_metric_oracles(acceptance):
    with Clock() as clk:
        rng = np.random.default_rng(11)
        X = rng.normal(size=(300, 8))
        tw = trustworthiness(X, X, 5)
        worst = 0.0
        for _ in range(100):
            A = rng.normal(size=(50, 3))
            Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
            Q[:, 0] *= -1 if np.linalg.det(Q) > 0 else 1  # keep a reflection in the map
            B = float(rng.uniform(0.1, 10)) * A @ Q + rng.normal(size=3)
            worst = max(worst, procrustes_distance(A, B))
        Y = np.array([[0.0, 0.0], [1.0, 0.0], [100.0, 0.0], [101.0, 0.0]])
        # brute force: a = 1 for every point, b is the mean over the two far points
        b = [100.5, 99.5, 99.5, 100.5]
        brute = sum((bi - 1.0) / bi for bi in b) / 4
        sil_err = abs(silhouette(Y, np.array([0, 0, 1, 1])) - brute)
    ok = tw == 1.0 and worst < 1e-10 and sil_err < 1e-12 and clk.elapsed < 5
    assert acceptance(11, "metric oracles", ok,
                      f"T(X,X)={tw}, Procrustes invariance {worst:.1e}, 4-point silhouette error {sil_err:.1e}",
                      clk.elapsed, 5)


def _explicit_triplet(t):
    # place y_i at the origin, y_j on the negative x axis, y_k at angle theta
    sin = math.sqrt(max(0.0, 1.0 - t.cos_theta**2))
    yi = [0.0, 0.0]
    yj = [-t.zeta1, 0.0]
    yk = [-t.zeta2 * t.cos_theta, -t.zeta2 * sin]
    s = 2.0 + t.zeta1**2 + t.zeta2**2
    fa = -2.0 * (1.0 + t.zeta2**2) / s**2
    fr = 2.0 * (1.0 + t.zeta1**2) / s**2
    dij = [yi[d] - yj[d] for d in range(2)]
    dik = [yi[d] - yk[d] for d in range(2)]
    ni = [yi[d] + t.lam * fa * dij[d] + t.lam * fr * dik[d] for d in range(2)]
    nj = [yj[d] - t.lam * fa * dij[d] for d in range(2)]
    nk = [yk[d] - t.lam * fr * dik[d] for d in range(2)]
    ra = sum((ni[d] - nj[d]) ** 2 for d in range(2)) / t.zeta1**2
    rr = sum((ni[d] - nk[d]) ** 2 for d in range(2)) / t.zeta2**2
    return ra, rr


def _explicit_tsne_ratio(Y, W, i, j, lam):
    m = len(Y)
    q = [[0.0 if a == b else 1.0 / (1.0 + math.dist(Y[a], Y[b]) ** 2) for b in range(m)] for a in range(m)]
    Z = sum(map(sum, q))
    c = lam * W[i][j] / Z
    yi = list(Y[i])
    yj = list(Y[j])
    for k in range(m):
        for d in range(2):
            yi[d] += c * 2 * q[i][k] ** 2 * (Y[i][d] - Y[k][d])
            yj[d] -= c * 2 * q[k][j] ** 2 * (Y[k][d] - Y[j][d])
    return math.dist(yi, yj) ** 2 / math.dist(Y[i], Y[j]) ** 2


def test_criterion_12_triplet_and_tsne_certificates(acceptance):
    with Clock() as clk:
        rng = np.random.default_rng(12)
        bad = skipped = 0
        for _ in range(10_000):
            t = TripletState(float(np.exp(rng.uniform(np.log(1e-2), np.log(10)))),
                             float(np.exp(rng.uniform(np.log(1e-2), np.log(10)))),
                             float(rng.uniform(-1, 1)), float(rng.uniform(0.05, 5)))
            ha, hr = trimap_h_a(t), trimap_h_r(t)
            ra, rr = _explicit_triplet(t)
            if min(abs(ha - 1), abs(hr - 1)) < 1e-9:
                skipped += 1
                continue
            bad += (ha < 1) != (ra < 1)
            bad += (hr > 1) != (rr > 1)
        tsne_bad = tsne_skipped = 0
        for _ in range(100):
            m = int(rng.integers(3, 12))
            Y = rng.normal(scale=float(rng.uniform(0.1, 5)), size=(m, 2))
            W = rng.uniform(size=(m, m))
            W = (W + W.T) / 2
            i, j = (int(v) for v in rng.choice(m, size=2, replace=False))
            lam = float(rng.uniform(0.1, 100))
            cert = tsne_repulsion_expansion(Y, W, i, j, lam)
            if abs(cert.h - 1) < 1e-9:
                tsne_skipped += 1
                continue
            tsne_bad += cert.expands != (_explicit_tsne_ratio(Y.tolist(), W.tolist(), i, j, lam) > 1)
    ok = bad == 0 and tsne_bad == 0 and clk.elapsed < 30
    assert acceptance(12, "TriMap/t-SNE certificates", ok,
                      f"triplet disagreements {bad} ({skipped} boundary skipped), "
                      f"t-SNE disagreements {tsne_bad} ({tsne_skipped} skipped)", clk.elapsed, 30)
