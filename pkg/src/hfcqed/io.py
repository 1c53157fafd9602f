"""CSV and JSON helpers shared by the command-line tools."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .fitting.lsq import Trace


def read_trace_csv(path: str | Path) -> Trace:
    """Read an ``x,y[,sigma]`` CSV (header required)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x", "y"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: header must contain x,y")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    x = np.array([float(r["x"]) for r in rows])
    y = np.array([float(r["y"]) for r in rows])
    sigma = None
    if "sigma" in reader.fieldnames and all(r.get("sigma") not in (None, "") for r in rows):
        sigma = np.array([float(r["sigma"]) for r in rows])
    return Trace(x, y, sigma)


def write_trace_csv(path: str | Path, trace: Trace) -> None:
    cols = {"x": trace.x, "y": trace.y}
    if trace.sigma is not None:
        cols["sigma"] = trace.sigma
    write_columns(path, cols)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_rows(path: str | Path, rows: Iterable[Mapping], fieldnames: list[str] | None = None) -> None:
    """Write dict rows; floats use repr so reading back is exact."""
    rows = list(rows)
    names = fieldnames or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, names)
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(v) for k, v in r.items()})


def write_columns(path: str | Path, columns: Mapping[str, Iterable]) -> None:
    names = list(columns)
    data = [list(columns[n]) for n in names]
    write_rows(path, (dict(zip(names, vals)) for vals in zip(*data)), names)


def read_rows(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def to_jsonable(obj):
    """Convert numpy scalars/arrays, paths and non-finite floats for JSON."""
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())
