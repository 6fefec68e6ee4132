"""Dataset ingestion, CSV emission and run manifests."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .graph import Dataset

__all__ = [
    "read_csv_matrix",
    "read_raw",
    "read_labels",
    "load_dataset",
    "write_raw",
    "embedding_csv",
    "atomic_write",
    "RunManifest",
]

_RAW_SUFFIXES = {".bin", ".f64", ".raw"}


def _parse_row(row, lineno):
    try:
        values = [float(v) for v in row]
    except ValueError as exc:
        raise DataError(f"line {lineno}: {exc}", line=lineno) from None
    if not all(math.isfinite(v) for v in values):
        raise DataError(f"line {lineno}: non-finite value", line=lineno)
    return values


def _is_header(row) -> bool:
    for v in row:
        try:
            float(v)
            return False
        except ValueError:
            pass
    return True


def read_csv_matrix(path) -> np.ndarray:
    """Read one point per row.

    Blank lines and ``#`` comments are skipped.  A first row in which no
    field parses as a number is taken as a header.  Errors carry the 1-based
    line number of the offending row.
    """
    rows: list[list[float]] = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if width is None and not rows and _is_header(row):
                continue
            values = _parse_row(row, lineno)
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DataError(f"line {lineno}: expected {width} fields, got {len(values)}", line=lineno)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def read_raw(path, sidecar=None) -> np.ndarray:
    """Little-endian float64, row-major, shaped by a ``{"n_points", "n_dims"}`` sidecar."""
    path = Path(path)
    sidecar = Path(sidecar) if sidecar else _sidecar(path)
    try:
        meta = json.loads(sidecar.read_text())
        n, d = int(meta["n_points"]), int(meta["n_dims"])
    except FileNotFoundError:
        raise DataError(f"missing sidecar {sidecar}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"bad sidecar {sidecar}: {exc}") from None
    data = np.fromfile(path, dtype="<f8")
    if data.size != n * d:
        raise DataError(f"{path}: expected {n * d} values, found {data.size}")
    return data.reshape(n, d).astype(np.float64)


def write_raw(X, path) -> None:
    X = np.asarray(X, dtype="<f8")
    path = Path(path)
    atomic_write(path, X.tobytes(order="C"))
    atomic_write(_sidecar(path), json.dumps({"n_points": X.shape[0], "n_dims": X.shape[1]}) + "\n")


def read_labels(path) -> np.ndarray:
    """Single-column integer CSV; an optional non-numeric header is skipped."""
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 1:
                raise DataError(f"line {lineno}: labels file must have one column", line=lineno)
            try:
                out.append(int(row[0]))
            except ValueError:
                if not out and _is_header(row):
                    continue
                raise DataError(f"line {lineno}: not an integer label: {row[0]!r}", line=lineno) from None
    return np.array(out, dtype=np.int64)


def load_dataset(path, labels=None) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    if path.suffix in _RAW_SUFFIXES or _sidecar(path).exists():
        X = read_raw(path)
    else:
        X = read_csv_matrix(path)
    y = read_labels(labels) if labels is not None else None
    return Dataset(X, y)


def embedding_csv(Y, header: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow([f"y{d}" for d in range(Y.shape[1])])
    for row in np.asarray(Y).tolist():
        w.writerow([repr(v) for v in row])
    return buf.getvalue()


def atomic_write(path, content: str | bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(content, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunManifest:
    command: str
    config_hash: str | None
    seeds: list[int]
    inputs: list[str]
    outputs: list[str]
    wall_time: float
    version: str
    extra: dict = field(default_factory=dict)

    def write(self, path) -> None:
        atomic_write(path, json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
