"""CSV and JSON persistence for curves, sweeps and reports."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from . import __version__
from .hypersurface import PolylineCurve

SWEEP_COLUMNS = ("n", "r", "lambda", "f_stable", "weak_stable", "witness_value")


def curve_to_csv(curve: PolylineCurve) -> str:
    """``# closed=`` / ``# lambda=`` / ``# estimator=`` header lines, then ``x,y`` rows."""
    buf = io.StringIO()
    buf.write(f"# closed={str(curve.closed).lower()}\n")
    if curve.lam is not None:
        buf.write(f"# lambda={float(curve.lam)!r}\n")
    buf.write(f"# estimator={curve.estimator}\n")
    buf.write("x,y\n")
    for x, y in curve.vertices.tolist():
        buf.write(f"{x!r},{y!r}\n")
    return buf.getvalue()


def write_curve(curve: PolylineCurve, path) -> Path:
    path = Path(path)
    path.write_text(curve_to_csv(curve))
    return path


def read_curve(path, closed: Optional[bool] = None, estimator: Optional[str] = None) -> PolylineCurve:
    """Read a curve CSV.  Keyword arguments override the metadata lines."""
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                meta[key.strip()] = val.strip()
                continue
            if line.replace(" ", "") == "x,y":
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns, got {len(parts)}")
            try:
                rows.append([float(parts[0]), float(parts[1])])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if closed is None:
        closed = meta.get("closed", "true").lower() in ("1", "true", "yes")
    lam = float(meta["lambda"]) if "lambda" in meta else None
    est = estimator or meta.get("estimator", "angle")
    return PolylineCurve(np.array(rows), closed=closed, estimator=est, lam=lam)


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def sweep_to_csv(rows: Iterable[dict], columns=SWEEP_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def report_json(command: str, config_sha: str, checks: List[dict], extra: Optional[dict] = None) -> str:
    """Deterministic report: sorted keys, fixed indentation, trailing newline."""
    doc = {"version": __version__, "command": command, "config_sha256": config_sha,
           "checks": checks, "passed": all(c.get("passed", True) for c in checks)}
    if extra:
        doc.update(extra)
    return json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n"
