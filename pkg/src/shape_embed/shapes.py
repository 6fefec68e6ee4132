"""Attraction and repulsion shapes.

A shape is the scalar coefficient ``f(zeta)`` that multiplies the difference
vector ``y_i - y_j`` in a single pair update, where ``zeta = ||y_i - y_j||``.
Negative values pull a pair together, positive values push it apart.

Every shape in the catalog is evaluated by one numba-compiled scalar kernel
(:func:`base_value`) so that the optimizer and the analysis code share a
single implementation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Sequence

import numba
import numpy as np

from .errors import (
    ConvergenceError,
    DomainError,
    NonInvertibleError,
    NoRootError,
    ParamError,
)

__all__ = [
    "ShapeKind",
    "LinearAdd",
    "ConstShift",
    "Scale",
    "CompositeSwitch",
    "ShapeSpec",
    "KernelFitConfig",
    "MonotonicityCheck",
    "ShapeCurve",
    "eval_shape",
    "eval_shape_array",
    "zeta_minus_one",
    "check_strictly_increasing",
    "fit_ab",
    "psi",
    "localmap_max_K",
    "dump_shape_curve",
    "shape_from_dict",
]


class ShapeKind(str, Enum):
    UMAP_ATTR = "UmapAttr"
    UMAP_REP = "UmapRep"
    GENERAL_ATTR = "GeneralAttr"
    GENERAL_REP = "GeneralRep"
    NEG_TSNE_ATTR = "NegTsneAttr"
    NEG_TSNE_REP = "NegTsneRep"
    PACMAP_NEAR = "PacmapNear"
    PACMAP_MID = "PacmapMid"
    PACMAP_FAR = "PacmapFar"
    LOCALMAP_AR = "LocalMapAR"
    TSNE_ATTR = "TsneAttr"
    TSNE_REP = "TsneRep"
    SNE_ATTR = "SneAttr"
    SNE_REP = "SneRep"
    MDS_AR = "MdsAR"
    GRAPH_MDS_AR = "GraphMdsAR"

    @property
    def code(self) -> int:
        return _KIND_CODES[self]

    @property
    def role(self) -> str:
        """``"attraction"``, ``"repulsion"`` or ``"mixed"``."""
        if self in _ATTRACTION:
            return "attraction"
        if self in _REPULSION:
            return "repulsion"
        return "mixed"


_KIND_CODES = {kind: i for i, kind in enumerate(ShapeKind)}

_ATTRACTION = frozenset(
    {
        ShapeKind.UMAP_ATTR,
        ShapeKind.GENERAL_ATTR,
        ShapeKind.NEG_TSNE_ATTR,
        ShapeKind.PACMAP_NEAR,
        ShapeKind.PACMAP_MID,
        ShapeKind.TSNE_ATTR,
        ShapeKind.SNE_ATTR,
    }
)
_REPULSION = frozenset(
    {
        ShapeKind.UMAP_REP,
        ShapeKind.GENERAL_REP,
        ShapeKind.NEG_TSNE_REP,
        ShapeKind.PACMAP_FAR,
        ShapeKind.TSNE_REP,
        ShapeKind.SNE_REP,
    }
)

# Positional layout of the parameter vector handed to the compiled kernel.
PARAM_ORDER = ("a", "b", "gamma", "K", "C", "d", "w")

_UMAP_DEFAULTS = {"a": 1.58, "b": 0.89}
_KIND_PARAMS: dict[ShapeKind, dict[str, float]] = {
    ShapeKind.UMAP_ATTR: _UMAP_DEFAULTS,
    ShapeKind.UMAP_REP: _UMAP_DEFAULTS,
    ShapeKind.GENERAL_ATTR: {"a": 1.0, "b": 1.0, "gamma": 1.0},
    ShapeKind.GENERAL_REP: {"a": 1.0, "b": 1.0, "gamma": 1.0},
    ShapeKind.NEG_TSNE_ATTR: {"a": 1.0, "b": 1.0},
    ShapeKind.NEG_TSNE_REP: {"a": 1.0, "b": 1.0},
    ShapeKind.PACMAP_NEAR: {"w": 1.0},
    ShapeKind.PACMAP_MID: {"w": 1.0},
    ShapeKind.PACMAP_FAR: {"w": 1.0},
    ShapeKind.LOCALMAP_AR: {"K": 10.0, "C": 10.0},
    ShapeKind.TSNE_ATTR: {},
    ShapeKind.TSNE_REP: {},
    ShapeKind.SNE_ATTR: {},
    ShapeKind.SNE_REP: {},
    ShapeKind.MDS_AR: {"d": 1.0},
    ShapeKind.GRAPH_MDS_AR: {"d": 1.0},
}

# name -> (lower bound, inclusive?)
_PARAM_BOUNDS = {
    "a": (0.0, False),
    "b": (0.0, False),
    "gamma": (1.0, True),
    "K": (0.0, False),
    "C": (1.0, False),
    "d": (0.0, True),
    "w": (0.0, False),
}


# ---------------------------------------------------------------------------
# modifiers


@dataclass(frozen=True)
class LinearAdd:
    """``f -> f - beta * zeta``: extra pull that grows with distance."""

    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ParamError(f"LinearAdd.beta must be finite and >= 0, got {self.beta}")


@dataclass(frozen=True)
class ConstShift:
    """``f -> f + eps``."""

    eps: float

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps >= 0):
            raise ParamError(f"ConstShift.eps must be finite and >= 0, got {self.eps}")


@dataclass(frozen=True)
class Scale:
    """``f -> c * f``."""

    c: float

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise ParamError(f"Scale.c must be finite and > 0, got {self.c}")


@dataclass(frozen=True)
class CompositeSwitch:
    """Replace the whole shape by ``other`` once ``epoch >= switch_epoch``."""

    other: "ShapeSpec"
    switch_epoch: int

    def __post_init__(self):
        if not isinstance(self.other, ShapeSpec):
            raise ParamError("CompositeSwitch.other must be a ShapeSpec")
        if int(self.switch_epoch) != self.switch_epoch or self.switch_epoch < 0:
            raise ParamError(f"switch_epoch must be an integer >= 0, got {self.switch_epoch}")


Modifier = LinearAdd | ConstShift | Scale | CompositeSwitch


# ---------------------------------------------------------------------------
# spec


@dataclass(frozen=True, eq=True)
class ShapeSpec:
    """A catalog shape with its parameters and an ordered modifier chain.

    Missing parameters take the kind's defaults; unknown or out-of-range
    parameters raise :class:`ParamError`.
    """

    kind: ShapeKind
    params: Mapping[str, float] = field(default_factory=dict)
    modifiers: tuple[Modifier, ...] = ()

    def __post_init__(self):
        try:
            kind = ShapeKind(self.kind)
        except ValueError:
            raise ParamError(f"unknown shape kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)

        allowed = _KIND_PARAMS[kind]
        unknown = set(self.params) - set(allowed)
        if unknown:
            raise ParamError(f"{kind.value} does not take parameter(s) {sorted(unknown)}")
        merged = dict(allowed)
        for name, value in self.params.items():
            value = float(value)
            lo, inclusive = _PARAM_BOUNDS[name]
            ok = math.isfinite(value) and (value >= lo if inclusive else value > lo)
            if not ok:
                op = ">=" if inclusive else ">"
                raise ParamError(f"{kind.value}.{name} must be {op} {lo}, got {value}")
            merged[name] = value
        object.__setattr__(self, "params", merged)

        mods = tuple(self.modifiers)
        for m in mods:
            if not isinstance(m, (LinearAdd, ConstShift, Scale, CompositeSwitch)):
                raise ParamError(f"unsupported modifier {m!r}")
        object.__setattr__(self, "modifiers", mods)

    def __hash__(self):
        return hash((self.kind, tuple(sorted(self.params.items())), self.modifiers))

    @property
    def role(self) -> str:
        return self.kind.role

    def param_vector(self) -> np.ndarray:
        p = {"a": 1.0, "b": 1.0, "gamma": 1.0, "K": 0.0, "C": 2.0, "d": 0.0, "w": 1.0}
        if self.kind is ShapeKind.NEG_TSNE_ATTR or self.kind is ShapeKind.NEG_TSNE_REP:
            p["gamma"] = 2.0
        p.update(self.params)
        return np.array([p[name] for name in PARAM_ORDER], dtype=np.float64)

    def singular_at_zero(self) -> bool:
        """True when the unmodified shape diverges as ``zeta -> 0``."""
        k, p = self.kind, self.params
        if k in (ShapeKind.UMAP_ATTR, ShapeKind.GENERAL_ATTR, ShapeKind.NEG_TSNE_ATTR):
            return p["b"] < 1.0
        if k is ShapeKind.UMAP_REP:
            return True
        if k is ShapeKind.GENERAL_REP:
            return p["gamma"] == 1.0 or p["b"] < 1.0
        if k is ShapeKind.NEG_TSNE_REP:
            return p["b"] < 1.0
        if k in (ShapeKind.MDS_AR, ShapeKind.GRAPH_MDS_AR):
            return p["d"] > 0.0
        return False

    def resolve(self, epoch: int = 0) -> tuple["ShapeSpec", float, float, float]:
        """Collapse the modifier chain active at ``epoch``.

        Returns ``(base, scale, beta, shift)`` such that
        ``f(zeta) = scale * base(zeta) - beta * zeta + shift``.
        """
        scale, beta, shift = 1.0, 0.0, 0.0
        for m in self.modifiers:
            if isinstance(m, CompositeSwitch):
                if epoch >= m.switch_epoch:
                    return m.other.resolve(epoch)
            elif isinstance(m, LinearAdd):
                beta += m.beta
            elif isinstance(m, ConstShift):
                shift += m.eps
            else:
                scale *= m.c
                beta *= m.c
                shift *= m.c
        base = ShapeSpec(self.kind, self.params) if self.modifiers else self
        return base, scale, beta, shift

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind.value, "params": dict(self.params)}
        if self.modifiers:
            out["modifiers"] = [_modifier_to_dict(m) for m in self.modifiers]
        return out


def _modifier_to_dict(m) -> dict:
    if isinstance(m, LinearAdd):
        return {"type": "LinearAdd", "beta": m.beta}
    if isinstance(m, ConstShift):
        return {"type": "ConstShift", "eps": m.eps}
    if isinstance(m, Scale):
        return {"type": "Scale", "c": m.c}
    return {"type": "CompositeSwitch", "other": m.other.to_dict(), "switch_epoch": m.switch_epoch}


_MODIFIER_FIELDS = {
    "LinearAdd": (LinearAdd, ("beta",)),
    "ConstShift": (ConstShift, ("eps",)),
    "Scale": (Scale, ("c",)),
    "CompositeSwitch": (CompositeSwitch, ("other", "switch_epoch")),
}


def shape_from_dict(doc: Mapping) -> ShapeSpec:
    """Build a :class:`ShapeSpec` from its JSON form, rejecting unknown keys."""
    if not isinstance(doc, Mapping):
        raise ParamError(f"shape must be an object, got {type(doc).__name__}")
    extra = set(doc) - {"kind", "params", "modifiers"}
    if extra:
        raise ParamError(f"unknown shape key(s) {sorted(extra)}")
    if "kind" not in doc:
        raise ParamError("shape is missing 'kind'")
    mods = []
    for m in doc.get("modifiers", []):
        if not isinstance(m, Mapping) or m.get("type") not in _MODIFIER_FIELDS:
            raise ParamError(f"bad modifier {m!r}")
        cls, names = _MODIFIER_FIELDS[m["type"]]
        extra = set(m) - set(names) - {"type"}
        missing = set(names) - set(m)
        if extra or missing:
            raise ParamError(f"modifier {m['type']}: unknown {sorted(extra)}, missing {sorted(missing)}")
        kwargs = {n: m[n] for n in names}
        if cls is CompositeSwitch:
            kwargs["other"] = shape_from_dict(kwargs["other"])
        mods.append(cls(**kwargs))
    params = doc.get("params", {})
    if not isinstance(params, Mapping):
        raise ParamError("shape 'params' must be an object")
    return ShapeSpec(doc["kind"], dict(params), tuple(mods))


# ---------------------------------------------------------------------------
# compiled evaluation


@numba.njit(cache=True, fastmath=False)
def base_value(code, p, z):
    """Unmodified shape ``code`` with parameter vector ``p`` at distance ``z``."""
    s = z * z
    if code == 0 or code == 2 or code == 4:  # UmapAttr / GeneralAttr / NegTsneAttr
        a, b, g = p[0], p[1], p[2]
        if code == 0:
            g = 1.0
        sb = s**b
        return -2.0 * a * b * s ** (b - 1.0) / (g + a * sb)
    if code == 1 or code == 3 or code == 5:  # UmapRep / GeneralRep / NegTsneRep
        a, b, g = p[0], p[1], p[2]
        if code == 1:
            g = 1.0
        sb = s**b
        if g == 1.0:
            return 2.0 * b / (s * (1.0 + a * sb))
        return 2.0 * a * b * s ** (b - 1.0) / ((g - 1.0 + a * sb) * (g + a * sb))
    if code == 6:
        t = 11.0 + s
        return -p[6] * 20.0 / (t * t)
    if code == 7:
        t = 10001.0 + s
        return -p[6] * 20000.0 / (t * t)
    if code == 8:
        t = 2.0 + s
        return p[6] * 2.0 / (t * t)
    if code == 9:
        K, C = p[3], p[4]
        t = 1.0 + C + s
        return -K * (C - 1.0 - s) / (2.0 * math.sqrt(1.0 + s) * t * t)
    if code == 10:
        return -2.0 / (1.0 + s)
    if code == 11:
        t = 1.0 + s
        return 2.0 / (t * t)
    if code == 12:
        return -2.0
    if code == 13:
        return 2.0 * math.exp(-s)
    if code == 14 or code == 15:
        d = p[5]
        c = 2.0 if code == 14 else 0.5
        if z == 0.0:
            return -c  # d == 0 limit; callers reject d > 0 at zero
        return -c * (z - d) / z
    return math.nan


@numba.njit(cache=True)
def modified_value(code, p, scale, beta, shift, z):
    return scale * base_value(code, p, z) - beta * z + shift


@numba.njit(cache=True)
def _eval_many(code, p, scale, beta, shift, z):
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        out[i] = scale * base_value(code, p, z[i]) - beta * z[i] + shift
    return out


def eval_shape(spec: ShapeSpec, zeta: float, epoch: int = 0) -> float:
    """Evaluate ``spec`` at distance ``zeta`` and training epoch ``epoch``.

    Raises
    ------
    DomainError
        If ``zeta`` is negative or not finite, or ``zeta == 0`` for a shape
        that diverges there.
    """
    zeta = float(zeta)
    if not math.isfinite(zeta) or zeta < 0:
        raise DomainError(f"zeta must be finite and >= 0, got {zeta}")
    if epoch < 0:
        raise ParamError(f"epoch must be >= 0, got {epoch}")
    base, scale, beta, shift = spec.resolve(epoch)
    if zeta == 0.0 and base.singular_at_zero():
        raise DomainError(f"{base.kind.value} is singular at zeta = 0")
    return float(modified_value(base.kind.code, base.param_vector(), scale, beta, shift, zeta))


def eval_shape_array(spec: ShapeSpec, zeta: Sequence[float] | np.ndarray, epoch: int = 0) -> np.ndarray:
    """Vectorised :func:`eval_shape` over an array of distances."""
    z = np.ascontiguousarray(zeta, dtype=np.float64).ravel()
    if not np.all(np.isfinite(z)) or np.any(z < 0):
        raise DomainError("zeta values must be finite and >= 0")
    base, scale, beta, shift = spec.resolve(epoch)
    if base.singular_at_zero() and np.any(z == 0):
        raise DomainError(f"{base.kind.value} is singular at zeta = 0")
    return _eval_many(base.kind.code, base.param_vector(), scale, beta, shift, z)


# ---------------------------------------------------------------------------
# monotonicity and the minimum distance for contraction


class MonotonicityCheck(NamedTuple):
    increasing: bool
    witness: float | None


def check_strictly_increasing(a: float, b: float, gamma: float = 1.0) -> MonotonicityCheck:
    """Certify that ``-2ab z^(2b-2) / (gamma + a z^(2b))`` is strictly increasing.

    The derivative has the sign of ``-g`` with
    ``g(z) = b - 1 - a b z^(2b) / (gamma + a z^(2b))``, so the shape increases
    wherever ``g < 0``.  ``g`` is scanned on 512 log-spaced points in
    ``[1e-6, 1e6]`` and the analytic condition ``b <= 1`` is required as well.
    On failure the first offending grid point is returned as the witness
    (``nan`` when only the analytic condition fails).
    """
    if not (a > 0 and b > 0 and gamma >= 1):
        raise ParamError(f"need a > 0, b > 0, gamma >= 1; got a={a}, b={b}, gamma={gamma}")
    z = np.logspace(-6, 6, 512)
    az = a * z ** (2 * b)
    g = b - 1.0 - b * az / (gamma + az)
    bad = np.flatnonzero(g >= 0)
    if bad.size:
        return MonotonicityCheck(False, float(z[bad[0]]))
    if b > 1:
        return MonotonicityCheck(False, math.nan)
    return MonotonicityCheck(True, None)


_BISECT_LO = 1e-12
_BISECT_HI = 1e6
_BISECT_TOL = 1e-10
_BISECT_MAXITER = 200

_INCREASING_FIXED = {ShapeKind.TSNE_ATTR, ShapeKind.PACMAP_NEAR, ShapeKind.PACMAP_MID}


def zeta_minus_one(spec: ShapeSpec, lam: float, epoch: int = 0) -> float:
    """Distance below which an attractive update expands the pair.

    Solves ``lam * f(zeta) = -1`` by bisection on ``[1e-12, 1e6]``.  Returns
    exactly ``0.0`` when ``lam * f`` stays at or above ``-1`` on the whole
    bracket, i.e. every attractive step contracts.

    Raises
    ------
    NonInvertibleError
        The (modified) shape cannot be certified strictly increasing.
    NoRootError
        ``lam * f`` is below ``-1`` at the upper end of the bracket.
    """
    if not (math.isfinite(lam) and lam > 0):
        raise ParamError(f"lambda must be > 0, got {lam}")
    base, scale, beta, shift = spec.resolve(epoch)
    kind = base.kind
    if kind.role != "attraction":
        if kind.role == "repulsion":
            raise ParamError(f"{kind.value} is a repulsion shape")
        raise NonInvertibleError(f"{kind.value} changes sign and is not invertible")
    if beta > 0:
        raise NonInvertibleError("LinearAdd makes the shape decreasing at large distance")
    if kind is ShapeKind.SNE_ATTR:
        if lam * (scale * -2.0 + shift) >= -1.0:
            return 0.0
        raise NonInvertibleError("constant shape below -1 has no inverse")
    if kind not in _INCREASING_FIXED:
        p = base.params
        gamma = p.get("gamma", 2.0 if kind is ShapeKind.NEG_TSNE_ATTR else 1.0)
        cert = check_strictly_increasing(p["a"], p["b"], gamma)
        if not cert.increasing:
            raise NonInvertibleError(
                f"{kind.value}(a={p['a']}, b={p['b']}) is not strictly increasing (witness {cert.witness})"
            )

    code, pv = kind.code, base.param_vector()

    def h(z):
        return lam * modified_value(code, pv, scale, beta, shift, z) + 1.0

    lo, hi = _BISECT_LO, _BISECT_HI
    if h(lo) >= 0.0:
        return 0.0
    if h(hi) < 0.0:
        raise NoRootError(f"lambda * f stays below -1 on [{lo}, {hi}]")
    for _ in range(_BISECT_MAXITER):
        if hi - lo <= _BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if h(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def localmap_max_K(C: float, lam: float) -> float:
    """Largest LocalMAP scaling ``K`` that avoids a pair flip at ``zeta = 0``."""
    if not C > 1:
        raise ParamError(f"C must be > 1, got {C}")
    if not lam > 0:
        raise ParamError(f"lambda must be > 0, got {lam}")
    return lam * (1.0 + C) ** 2 / (C - 1.0)


# ---------------------------------------------------------------------------
# (a, b) fit


@dataclass(frozen=True)
class KernelFitConfig:
    """Target curve for :func:`fit_ab`.

    ``grid_max`` defaults to ``3 * spread``; the grid is
    ``grid_max * k / grid_points`` for ``k = 1 .. grid_points``.
    """

    min_dist: float = 0.1
    spread: float = 1.0
    grid_max: float | None = None
    grid_points: int = 300

    def __post_init__(self):
        if not (self.min_dist > 0 and self.spread > 0):
            raise ParamError("min_dist and spread must be > 0")
        if self.grid_max is None:
            object.__setattr__(self, "grid_max", 3.0 * self.spread)
        if not self.grid_max > 0:
            raise ParamError("grid_max must be > 0")
        if int(self.grid_points) != self.grid_points or self.grid_points < 50:
            raise ParamError("grid_points must be an integer >= 50")
        if not self.min_dist < self.grid_max:
            raise ParamError(f"min_dist ({self.min_dist}) must be below grid_max ({self.grid_max})")

    def grid(self) -> np.ndarray:
        k = np.arange(1, self.grid_points + 1, dtype=np.float64)
        return self.grid_max * k / self.grid_points


def psi(zeta: np.ndarray, min_dist: float, spread: float = 1.0) -> np.ndarray:
    """Target similarity: 1 inside ``min_dist``, exponential decay beyond."""
    zeta = np.asarray(zeta, dtype=np.float64)
    return np.where(zeta < min_dist, 1.0, np.exp(-(zeta - min_dist) / spread))


def _q(z, a, b):
    return 1.0 / (1.0 + a * z ** (2.0 * b))


def fit_ab(cfg: KernelFitConfig = KernelFitConfig()) -> tuple[float, float]:
    """Fit ``q(z) = 1 / (1 + a z^(2b))`` to :func:`psi` by least squares.

    Levenberg-Marquardt in ``(log a, log b)`` from ``(1, 1)``.  Stops when an
    iteration's step has norm below ``1e-8`` or after 200 iterations.
    """
    z = cfg.grid()
    target = psi(z, cfg.min_dist, cfg.spread)
    logz = np.log(z)
    theta = np.zeros(2)
    mu = 1e-3
    stall = 0

    def ssr(t):
        r = _q(z, math.exp(t[0]), math.exp(t[1])) - target
        return float(r @ r), r

    cost, r = ssr(theta)
    for _ in range(200):
        a, b = math.exp(theta[0]), math.exp(theta[1])
        az = a * z ** (2.0 * b)
        dq = -az / (1.0 + az) ** 2  # d q / d log(a z^2b)
        J = np.column_stack([dq, dq * 2.0 * b * logz])
        JtJ = J.T @ J
        grad = J.T @ r
        step = np.linalg.solve(JtJ + mu * np.diag(np.diag(JtJ)), -grad)
        new_cost, new_r = ssr(theta + step)
        if np.linalg.norm(step) < 1e-8:
            if new_cost <= cost:
                theta = theta + step
            break
        if new_cost < cost:
            stall = stall + 1 if cost - new_cost < 1e-12 else 0
            theta, cost, r = theta + step, new_cost, new_r
            mu = max(mu / 3.0, 1e-12)
        else:
            stall += 1
            mu *= 2.0
        if stall >= 20:
            raise ConvergenceError(f"fit_ab stalled at a={math.exp(theta[0])}, b={math.exp(theta[1])}")
    return math.exp(theta[0]), math.exp(theta[1])


# ---------------------------------------------------------------------------
# curve dump


_CLAMP_ZETA = 1e-9


@dataclass(frozen=True)
class ShapeCurve:
    zeta: np.ndarray
    f: np.ndarray
    clamped: np.ndarray

    def rows(self) -> Iterable[tuple[float, float, int]]:
        return zip(self.zeta.tolist(), self.f.tolist(), self.clamped.astype(int).tolist())

    def to_csv(self, fh=None) -> str | None:
        """Write ``zeta,f,clamped`` rows; returns the text when ``fh`` is None."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["zeta", "f", "clamped"])
        for z, f, c in self.rows():
            w.writerow([repr(z), repr(f), c])
        return buf.getvalue() if fh is None else None


def dump_shape_curve(
    spec: ShapeSpec, zeta_min: float, zeta_max: float, n_points: int, epoch: int = 0
) -> ShapeCurve:
    """Tabulate ``spec`` on a linear grid.

    A grid point at zero for a shape that diverges there is moved to
    ``1e-9`` and flagged in the ``clamped`` column.
    """
    if not (0 <= zeta_min < zeta_max and math.isfinite(zeta_max)):
        raise ParamError(f"need 0 <= zeta_min < zeta_max, got [{zeta_min}, {zeta_max}]")
    if int(n_points) != n_points or n_points < 2:
        raise ParamError(f"n_points must be an integer >= 2, got {n_points}")
    z = np.linspace(zeta_min, zeta_max, int(n_points))
    clamped = np.zeros(z.shape, dtype=bool)
    base, *_ = spec.resolve(epoch)
    if base.singular_at_zero():
        clamped = z == 0.0
        z = np.where(clamped, _CLAMP_ZETA, z)
    f = eval_shape_array(spec, z, epoch)
    if not np.all(np.isfinite(f)):
        raise ParamError("shape produced non-finite values on the requested grid")
    return ShapeCurve(z, f, clamped)
