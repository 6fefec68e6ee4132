"""Command-line front end.

Exit codes: 0 success, 1 failed self-check, 2 invalid configuration or
arguments, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .embedder import OptimizerConfig, embed_data, load_config, run_consistency, run_sweep
from .errors import (
    ConfigError,
    DataError,
    DegenerateError,
    DimensionError,
    LabelError,
    NonFiniteError,
    ParamError,
    RankError,
    ShapeEmbedError,
)
from .io import RunManifest, atomic_write, embedding_csv, load_dataset, write_raw
from .oracle import oracle_csv, run_oracle
from .shapes import KernelFitConfig, dump_shape_curve, fit_ab, shape_from_dict
from .synthetic import gaussian_mixture

log = logging.getLogger("shape_embed")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _config(args) -> OptimizerConfig:
    cfg = load_config(args.config) if args.config else OptimizerConfig()
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        over["epochs"] = args.epochs
    try:
        cfg = replace(cfg, **over)
        la, lr = getattr(args, "lambda_a", None), getattr(args, "lambda_r", None)
        if isinstance(la, float):
            cfg = replace(cfg, schedule_a=replace(cfg.schedule_a, lam0=la))
        if isinstance(lr, float):
            cfg = replace(cfg, schedule_r=replace(cfg.schedule_r, lam0=lr))
    except ParamError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _emit(text: str, out) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _manifest(args, command, cfg, seeds, outputs, start, extra=None):
    if not args.out:
        return
    given = (getattr(args, "data", None), getattr(args, "config", None), getattr(args, "labels", None))
    inputs = [str(p) for p in given if p]
    out = Path(args.out)
    path = out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")
    RunManifest(
        command=command,
        config_hash=cfg.hash() if cfg is not None else None,
        seeds=list(seeds),
        inputs=inputs,
        outputs=[str(o) for o in outputs],
        wall_time=round(time.perf_counter() - start, 6),
        version=__version__,
        extra=extra or {},
    ).write(path)


# ---------------------------------------------------------------------------
# commands


def cmd_embed(args) -> int:
    start = time.perf_counter()
    cfg = _config(args)
    ds = load_dataset(args.data, args.labels)
    emb = embed_data(ds, cfg, parallel=args.parallel)
    _emit(embedding_csv(emb.Y, args.header), args.out)
    _manifest(args, "embed", cfg, [cfg.seed], [args.out], start)
    return EXIT_OK


def cmd_sweep(args) -> int:
    start = time.perf_counter()
    cfg = _config(args)
    ds = load_dataset(args.data, args.labels)
    if ds.labels is None:
        raise LabelError("sweep needs --labels")
    rows = run_sweep(ds, ds.labels, cfg, args.lambda_a, args.lambda_r, trust_k=args.trust_k,
                     trust_sample=args.trust_sample, parallel=args.parallel)
    lines = ["lambda_a,lambda_r,trustworthiness,silhouette"]
    lines += [f"{r.lambda_a!r},{r.lambda_r!r},{r.trustworthiness!r},{r.silhouette!r}" for r in rows]
    _emit("\n".join(lines) + "\n", args.out)
    _manifest(args, "sweep", cfg, [cfg.seed], [args.out], start)
    return EXIT_OK


def cmd_consistency(args) -> int:
    start = time.perf_counter()
    cfg = _config(args)
    if not args.out:
        raise ConfigError("consistency needs --out DIR")
    ds = load_dataset(args.data, args.labels)
    seed0 = cfg.seed
    res = run_consistency(ds, cfg, args.runs, seed0, parallel=args.parallel)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    for r, e in enumerate(res.runs):
        atomic_write(out / f"run_{r:03d}.csv", embedding_csv(e.Y, args.header))
        outputs.append(out / f"run_{r:03d}.csv")
    atomic_write(out / "reference.csv", embedding_csv(res.reference.Y, args.header))
    buf = io.StringIO()
    res.matrix.to_csv(buf)
    atomic_write(out / "procrustes.csv", buf.getvalue())
    atomic_write(out / "summary.csv", f"mean,std\n{res.matrix.mean!r},{res.matrix.std!r}\n")
    outputs += [out / "reference.csv", out / "procrustes.csv", out / "summary.csv"]
    _manifest(args, "consistency", cfg, range(seed0, seed0 + args.runs), outputs, start,
              {"order": res.matrix.order.tolist()})
    return EXIT_OK


def _shape_arg(text: str):
    p = Path(text)
    try:
        doc = json.loads(p.read_text()) if p.exists() else json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid shape JSON: {exc}") from exc
    try:
        return shape_from_dict(doc)
    except ParamError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_shapes(args) -> int:
    spec = _shape_arg(args.spec)
    lo, hi = args.range
    try:
        curve = dump_shape_curve(spec, lo, hi, args.points, args.epoch)
    except ParamError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(curve.to_csv(), args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    rows = run_oracle(seed=args.seed if args.seed is not None else 0)
    _emit(oracle_csv(rows), args.out)
    return EXIT_OK if all(r.passed for r in rows if not r.informational) else EXIT_CHECK


def cmd_fit_ab(args) -> int:
    try:
        a, b = fit_ab(KernelFitConfig(args.min_dist, args.spread))
    except ParamError as exc:
        raise ConfigError(str(exc)) from exc
    sys.stdout.write(f"a,b\n{a:.6f},{b:.6f}\n")
    return EXIT_OK


def cmd_make_synthetic(args) -> int:
    try:
        ds = gaussian_mixture(args.clusters, args.points, args.dims, args.sigma, args.separation,
                              args.seed if args.seed is not None else 0)
    except ParamError as exc:
        raise ConfigError(str(exc)) from exc
    if args.raw:
        if not args.out:
            raise ConfigError("--raw needs --out")
        write_raw(ds.X, args.out)
    else:
        _emit(embedding_csv(ds.X, False), args.out)
    if args.labels_out:
        atomic_write(args.labels_out, "".join(f"{v}\n" for v in ds.labels.tolist()))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p, data=True):
    if data:
        p.add_argument("--data", required=True, help="CSV or raw float64 dataset")
        p.add_argument("--labels", help="single-column integer label CSV")
    p.add_argument("--config", help="optimizer config JSON")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--parallel", action="store_true", help="race-tolerant multi-threaded updates")
    p.add_argument("--header", action="store_true", help="write a y0,y1,... header row")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shape-embed", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="embed a dataset")
    _common(p)
    p.add_argument("--lambda-a", type=float, help="initial attraction rate")
    p.add_argument("--lambda-r", type=float, help="initial repulsion rate")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("sweep", help="constant-rate grid over lambda_a x lambda_r")
    _common(p)
    p.add_argument("--lambda-a", type=_floats, required=True, help="comma-separated grid")
    p.add_argument("--lambda-r", type=_floats, required=True, help="comma-separated grid")
    p.add_argument("--trust-k", type=int, default=5)
    p.add_argument("--trust-sample", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("consistency", help="random-init runs against a PCA reference")
    _common(p)
    p.add_argument("--runs", type=int, default=10)
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("shapes", help="tabulate a shape curve")
    p.add_argument("--spec", required=True, help="shape JSON, inline or a file path")
    p.add_argument("--range", type=_floats, default=[0.0, 5.0], help="zmin,zmax")
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--epoch", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_shapes)

    p = sub.add_parser("oracle", help="run the closed-form vs explicit-update self-checks")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("fit-ab", help="fit the low-dimensional kernel parameters")
    p.add_argument("min_dist", type=float, nargs="?", default=0.1)
    p.add_argument("spread", type=float, nargs="?", default=1.0)
    p.set_defaults(func=cmd_fit_ab)

    p = sub.add_parser("make-synthetic", help="write a seeded Gaussian-mixture dataset")
    p.add_argument("--out")
    p.add_argument("--labels-out")
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--points", type=int, default=2000)
    p.add_argument("--dims", type=int, default=50)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--separation", type=float, default=0.7)
    p.add_argument("--seed", type=int)
    p.add_argument("--raw", action="store_true", help="raw float64 plus JSON sidecar")
    p.set_defaults(func=cmd_make_synthetic)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "range", None) is not None and len(args.range) != 2:
        print("error: --range needs two values", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, ParamError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DimensionError, LabelError, RankError, DegenerateError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NonFiniteError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ShapeEmbedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
