"""Negative-sampling optimizer with pluggable attraction and repulsion shapes.

Each epoch walks the positive edges in order.  An edge fires when its
weight-proportional accumulator comes due; a firing edge pulls both endpoints
together with the attraction shape and then pushes one endpoint away from
``negatives_per_positive`` uniformly drawn points with the repulsion shape.
Every per-coordinate displacement is clipped to ``[-clip, clip]``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import _kernel
from .errors import ConfigError, DimensionError, NonFiniteError, ParamError, RankError
from .graph import AffinityGraph, Dataset, PacmapPairs, fuzzy_graph, pacmap_pairs
from .metrics import ProcrustesMatrix, procrustes_matrix, silhouette, trustworthiness
from .shapes import ShapeSpec, shape_from_dict

__all__ = [
    "Schedule",
    "MidNearConfig",
    "OptimizerConfig",
    "Embedding",
    "init_pca",
    "init_random",
    "initial_embedding",
    "embed",
    "embed_data",
    "ConsistencyResult",
    "run_consistency",
    "SweepRow",
    "run_sweep",
    "config_from_dict",
    "load_config",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Schedule:
    """Learning rate per epoch: constant, or linear decay ``lam0 * (1 - t / T)``.

    ``epochs=None`` means "use the optimizer's epoch count".
    """

    kind: str = "LinearAnneal"
    lam0: float = 1.0
    epochs: int | None = None

    def __post_init__(self):
        if self.kind not in ("Constant", "LinearAnneal"):
            raise ParamError(f"schedule kind must be Constant or LinearAnneal, got {self.kind!r}")
        if not (math.isfinite(self.lam0) and self.lam0 >= 0):
            raise ParamError(f"lam0 must be finite and >= 0, got {self.lam0}")
        if self.epochs is not None and (int(self.epochs) != self.epochs or self.epochs < 1):
            raise ParamError(f"schedule epochs must be a positive integer, got {self.epochs}")

    def rate(self, t: int, total: int) -> float:
        if self.kind == "Constant":
            return self.lam0
        T = self.epochs or total
        return max(0.0, self.lam0 * (1.0 - t / T))

    @classmethod
    def constant(cls, lam0: float) -> "Schedule":
        return cls("Constant", lam0)

    @classmethod
    def anneal(cls, lam0: float = 1.0) -> "Schedule":
        return cls("LinearAnneal", lam0)


@dataclass(frozen=True)
class MidNearConfig:
    """Extra attraction channel over mid-near pairs, scaled by ``weight``."""

    shape: ShapeSpec = field(default_factory=lambda: ShapeSpec("PacmapMid"))
    weight: float = 1.0
    n_pairs: int = 5

    def __post_init__(self):
        if not self.weight > 0:
            raise ParamError("mid-near weight must be > 0")
        if self.shape.role == "repulsion":
            raise ParamError("mid-near channel needs an attraction shape")


def _branches(spec: ShapeSpec):
    yield spec
    for m in spec.modifiers:
        other = getattr(m, "other", None)
        if other is not None:
            yield from _branches(other)


@dataclass(frozen=True)
class OptimizerConfig:
    epochs: int = 500
    attraction: ShapeSpec = field(default_factory=lambda: ShapeSpec("UmapAttr"))
    repulsion: ShapeSpec = field(default_factory=lambda: ShapeSpec("UmapRep"))
    mid_near: MidNearConfig | None = None
    schedule_a: Schedule = field(default_factory=Schedule)
    schedule_r: Schedule = field(default_factory=Schedule)
    negatives_per_positive: int = 5
    clip: float = 4.0
    seed: int = 0
    dim: int = 2
    n_neighbors: int = 15
    init: str = "pca"
    init_scale: float = 10.0

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise ParamError(f"epochs must be a non-negative integer, got {self.epochs}")
        for spec in _branches(self.attraction):
            if spec.role == "repulsion":
                raise ParamError(f"attraction channel cannot use {spec.kind.value}")
        for spec in _branches(self.repulsion):
            if spec.role != "repulsion":
                raise ParamError(f"repulsion channel cannot use {spec.kind.value}")
        if int(self.negatives_per_positive) != self.negatives_per_positive or self.negatives_per_positive < 0:
            raise ParamError("negatives_per_positive must be a non-negative integer")
        if not (math.isfinite(self.clip) and self.clip > 0):
            raise ParamError(f"clip must be > 0, got {self.clip}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ParamError(f"dim must be >= 1, got {self.dim}")
        if int(self.n_neighbors) != self.n_neighbors or self.n_neighbors < 1:
            raise ParamError("n_neighbors must be a positive integer")
        if self.init not in ("pca", "random"):
            raise ParamError(f"init must be 'pca' or 'random', got {self.init!r}")
        if not self.init_scale > 0:
            raise ParamError("init_scale must be > 0")

    def to_dict(self) -> dict:
        d = {
            "epochs": self.epochs,
            "attraction": self.attraction.to_dict(),
            "repulsion": self.repulsion.to_dict(),
            "mid_near": None,
            "schedule_a": _schedule_dict(self.schedule_a),
            "schedule_r": _schedule_dict(self.schedule_r),
            "negatives_per_positive": self.negatives_per_positive,
            "clip": self.clip,
            "seed": self.seed,
            "dim": self.dim,
            "n_neighbors": self.n_neighbors,
            "init": self.init,
            "init_scale": self.init_scale,
        }
        if self.mid_near is not None:
            d["mid_near"] = {
                "shape": self.mid_near.shape.to_dict(),
                "weight": self.mid_near.weight,
                "n_pairs": self.mid_near.n_pairs,
            }
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _schedule_dict(s: Schedule) -> dict:
    d = {"kind": s.kind, "lam0": s.lam0}
    if s.epochs is not None:
        d["epochs"] = s.epochs
    return d


def _strict(doc, allowed, where):
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{where} must be an object")
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def config_from_dict(doc: Mapping) -> OptimizerConfig:
    """Parse the JSON form of :class:`OptimizerConfig`; unknown keys are errors."""
    fields_ = OptimizerConfig.__dataclass_fields__
    _strict(doc, fields_, "config")
    kw = dict(doc)
    try:
        for key in ("attraction", "repulsion"):
            if key in kw:
                kw[key] = shape_from_dict(kw[key])
        for key in ("schedule_a", "schedule_r"):
            if key in kw:
                _strict(kw[key], ("kind", "lam0", "epochs"), key)
                kw[key] = Schedule(**kw[key])
        if kw.get("mid_near") is not None:
            _strict(kw["mid_near"], ("shape", "weight", "n_pairs"), "mid_near")
            mn = dict(kw["mid_near"])
            if "shape" in mn:
                mn["shape"] = shape_from_dict(mn["shape"])
            kw["mid_near"] = MidNearConfig(**mn)
        return OptimizerConfig(**kw)
    except (ParamError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> OptimizerConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    return config_from_dict(doc)


# ---------------------------------------------------------------------------
# initialisation


@dataclass(frozen=True)
class Embedding:
    Y: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return self.Y.shape[0]


def init_pca(X, d: int = 2, scale_extent: float = 10.0) -> Embedding:
    """Project onto the top ``d`` principal axes, then rescale to ``scale_extent``.

    Each axis is oriented so its largest-magnitude loading is positive; the
    output is scaled so the largest absolute coordinate equals
    ``scale_extent``.
    """
    X = X.X if isinstance(X, Dataset) else Dataset(X).X
    n, dim = X.shape
    if d > dim:
        raise RankError(f"cannot take {d} components of {dim}-dimensional data")
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / max(n - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    tol = max(evals[0], 0.0) * dim * np.finfo(float).eps
    if np.sum(evals > tol) < d:
        raise RankError(f"covariance rank {int(np.sum(evals > tol))} < {d}")
    V = evecs[:, :d]
    lead = V[np.argmax(np.abs(V), axis=0), np.arange(d)]
    V = V * np.where(lead < 0, -1.0, 1.0)
    Y = Xc @ V
    Y *= scale_extent / np.abs(Y).max()
    return Embedding(Y, {"init": "pca", "scale_extent": scale_extent})


def init_random(n_points: int, d: int = 2, sigma: float = 10.0, seed: int = 0) -> Embedding:
    """I.i.d. normal coordinates with standard deviation ``sigma``."""
    if not sigma > 0:
        raise ParamError(f"sigma must be > 0, got {sigma}")
    Y = np.random.default_rng(seed).normal(0.0, sigma, size=(n_points, d))
    return Embedding(Y, {"init": "random", "seed": seed, "sigma": sigma})


def initial_embedding(X, cfg: OptimizerConfig, seed: int | None = None) -> Embedding:
    if cfg.init == "pca":
        return init_pca(X, cfg.dim, cfg.init_scale)
    n = X.n_points if isinstance(X, Dataset) else np.asarray(X).shape[0]
    return init_random(n, cfg.dim, cfg.init_scale, cfg.seed if seed is None else seed)


# ---------------------------------------------------------------------------
# optimisation


def _threads_from_env():
    value = os.environ.get("SHAPE_EMBED_THREADS")
    if value:
        import numba

        numba.set_num_threads(max(1, min(int(value), numba.config.NUMBA_NUM_THREADS)))


def _compiled(spec: ShapeSpec, epoch: int):
    base, scale, beta, shift = spec.resolve(epoch)
    return base.kind.code, base.param_vector(), np.array([scale, beta, shift])


def _mid_edges(mid_pairs, n):
    if mid_pairs is None:
        raise ParamError("config enables the mid-near channel but no mid-near pairs were given")
    if isinstance(mid_pairs, PacmapPairs):
        h, t = mid_pairs.mid_edges()
    else:
        h, t = mid_pairs
    h = np.ascontiguousarray(h, dtype=np.int64)
    t = np.ascontiguousarray(t, dtype=np.int64)
    if h.shape != t.shape or (h.size and (h.max() >= n or t.max() >= n or min(h.min(), t.min()) < 0)):
        raise DimensionError("mid-near pairs do not fit the embedding")
    return h, t


def embed(
    graph: AffinityGraph,
    cfg: OptimizerConfig,
    init: Embedding,
    mid_pairs: PacmapPairs | tuple | None = None,
    parallel: bool = False,
) -> Embedding:
    """Run ``cfg.epochs`` epochs of negative-sampling updates from ``init``.

    Deterministic for a fixed ``cfg.seed`` unless ``parallel`` is set, in
    which case edges are processed concurrently without synchronisation.

    Raises
    ------
    NonFiniteError
        A coordinate became non-finite; carries the epoch and edge index.
    """
    Y = np.array(init.Y, dtype=np.float64, order="C", copy=True)
    if Y.ndim != 2 or Y.shape[0] != graph.n_points:
        raise DimensionError(f"graph has {graph.n_points} points, init has shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise NonFiniteError("initial embedding is not finite", epoch=0)

    head = np.ascontiguousarray(graph.head, dtype=np.int64)
    tail = np.ascontiguousarray(graph.tail, dtype=np.int64)
    weight = np.asarray(graph.weight, dtype=np.float64)
    if weight.size:
        period = weight.max() / weight
    else:
        period = np.empty(0)
    next_fire = period.copy()
    flip = np.zeros(head.shape[0], dtype=np.bool_)

    if cfg.mid_near is not None:
        m_head, m_tail = _mid_edges(mid_pairs, Y.shape[0])
    else:
        m_head = m_tail = np.empty(0, dtype=np.int64)

    step = _kernel.run_epoch
    if parallel:
        _threads_from_env()
        step = _kernel.run_epoch_parallel
    _kernel.seed_rng(int(cfg.seed) % (2**32))

    mid_shape = cfg.mid_near.shape if cfg.mid_near is not None else ShapeSpec("PacmapMid")
    mid_weight = cfg.mid_near.weight if cfg.mid_near is not None else 0.0
    T = cfg.epochs
    for t in range(T):
        lam_a = cfg.schedule_a.rate(t, T)
        lam_r = cfg.schedule_r.rate(t, T)
        a_code, a_p, a_mod = _compiled(cfg.attraction, t)
        r_code, r_p, r_mod = _compiled(cfg.repulsion, t)
        m_code, m_p, m_mod = _compiled(mid_shape, t)
        bad = step(
            Y, head, tail, period, next_fire, flip, t,
            a_code, a_p, a_mod, lam_a,
            r_code, r_p, r_mod, lam_r,
            int(cfg.negatives_per_positive), float(cfg.clip),
            m_head, m_tail, m_code, m_p, m_mod, lam_a * mid_weight,
        )  # fmt: skip
        if bad >= 0:
            edge = int(bad) if not parallel else None
            raise NonFiniteError(f"non-finite coordinate at epoch {t}, edge {edge}", epoch=t, edge=edge)
    meta = dict(init.meta)
    meta.update({"seed": cfg.seed, "config_hash": cfg.hash(), "epochs": T, "parallel": parallel})
    return Embedding(Y, meta)


def embed_data(X, cfg: OptimizerConfig, init: Embedding | None = None, graph: AffinityGraph | None = None,
               parallel: bool = False) -> Embedding:
    """Build the fuzzy graph (and mid-near pairs if configured) and embed ``X``."""
    ds = X if isinstance(X, Dataset) else Dataset(X)
    if graph is None:
        graph = fuzzy_graph(ds, cfg.n_neighbors)
    if init is None:
        init = initial_embedding(ds, cfg)
    mid = None
    if cfg.mid_near is not None:
        mid = pacmap_pairs(ds, n_nb=min(10, ds.n_points - 2), n_mn=cfg.mid_near.n_pairs, n_fp=0, seed=cfg.seed)
    return embed(graph, cfg, init, mid_pairs=mid, parallel=parallel)


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class ConsistencyResult:
    runs: list[Embedding]
    reference: Embedding
    matrix: ProcrustesMatrix


def run_consistency(X, cfg: OptimizerConfig, R: int, seed0: int = 0,
                    graph: AffinityGraph | None = None, parallel: bool = False) -> ConsistencyResult:
    """``R`` randomly initialised runs (seeds ``seed0 .. seed0+R-1``) against a PCA-initialised reference."""
    if int(R) != R or R < 1:
        raise ParamError(f"R must be a positive integer, got {R}")
    ds = X if isinstance(X, Dataset) else Dataset(X)
    if graph is None:
        graph = fuzzy_graph(ds, cfg.n_neighbors)
    reference = embed_data(ds, replace(cfg, init="pca"), graph=graph, parallel=parallel)
    runs = []
    for r in range(R):
        seed = seed0 + r
        run_cfg = replace(cfg, seed=seed, init="random")
        init = init_random(ds.n_points, cfg.dim, cfg.init_scale, seed)
        runs.append(embed_data(ds, run_cfg, init=init, graph=graph, parallel=parallel))
        log.info("consistency run %d/%d done", r + 1, R)
    matrix = procrustes_matrix(reference.Y, [e.Y for e in runs])
    return ConsistencyResult(runs, reference, matrix)


@dataclass(frozen=True)
class SweepRow:
    lambda_a: float
    lambda_r: float
    trustworthiness: float
    silhouette: float


def run_sweep(X, labels, cfg_template: OptimizerConfig, lambda_a_grid: Sequence[float],
              lambda_r_grid: Sequence[float], graph: AffinityGraph | None = None,
              init: Embedding | None = None, trust_k: int = 5, trust_sample: int | None = None,
              parallel: bool = False) -> list[SweepRow]:
    """One constant-rate embedding per ``(lambda_a, lambda_r)`` cell.

    All cells share the graph, the initial embedding and the seed.
    """
    if not len(lambda_a_grid) or not len(lambda_r_grid):
        raise ParamError("sweep grids must be non-empty")
    ds = X if isinstance(X, Dataset) else Dataset(X, labels)
    if labels is None:
        labels = ds.labels
    if graph is None:
        graph = fuzzy_graph(ds, cfg_template.n_neighbors)
    if init is None:
        init = initial_embedding(ds, cfg_template)
    rows = []
    for la in lambda_a_grid:
        for lr in lambda_r_grid:
            cfg = replace(cfg_template, schedule_a=Schedule.constant(la), schedule_r=Schedule.constant(lr))
            Y = embed_data(ds, cfg, init=init, graph=graph, parallel=parallel).Y
            rows.append(SweepRow(
                float(la), float(lr),
                trustworthiness(ds.X, Y, k=trust_k, sample_size=trust_sample, seed=cfg.seed),
                silhouette(Y, labels),
            ))  # fmt: skip
            log.info("sweep cell lambda_a=%g lambda_r=%g done", la, lr)
    return rows
