"""Deterministic CSV/JSON writers.

Floats are written with 12 significant digits, keys and columns keep the
caller's order and nothing time-dependent is recorded, so identical inputs
give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .scenario import NetworkScenario

__all__ = ["fmt", "clean", "provenance", "csv_text", "json_text", "write_csv", "write_json", "read_csv"]

TOOL = "iotstab"


def fmt(x) -> str:
    """Render one CSV cell."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def clean(obj):
    """Round floats to 12 significant digits and convert numpy types for JSON."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.12g}")
    return obj


def provenance(s: NetworkScenario | None, seed: int | None, **extra) -> dict:
    """Tool version, resolved scenario, its hash and the seed."""
    out = {"tool": TOOL, "version": __version__}
    if s is not None:
        out["scenario_hash"] = s.digest()
        out["scenario"] = s.to_dict()
    out["seed"] = seed
    out.update(extra)
    return out


def csv_text(columns, rows, meta: dict | None = None) -> str:
    """Comment line with provenance, then the header row, then data rows."""
    buf = io.StringIO()
    if meta:
        items = " ".join(f"{k}={_meta_value(v)}" for k, v in meta.items())
        buf.write(f"# {items}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    n = len(columns)
    for row in rows:
        row = list(row)
        if len(row) != n:
            raise ValueError(f"row has {len(row)} cells, expected {n}")
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _meta_value(v) -> str:
    if isinstance(v, dict):
        return json.dumps(clean(v), separators=(",", ":"), sort_keys=True)
    return fmt(v).replace(" ", "_")


def json_text(obj) -> str:
    return json.dumps(clean(obj), indent=2) + "\n"


def _write(path, text: str) -> None:
    if path is None or str(path) == "-":
        import sys

        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def write_csv(path, columns, rows, meta: dict | None = None) -> None:
    _write(path, csv_text(columns, rows, meta))


def write_json(path, obj) -> None:
    _write(path, json_text(obj))


def read_csv(text: str) -> tuple[list[str], list[list[str]]]:
    """Parse text written by :func:`csv_text` (comment lines skipped)."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        return [], []
    return rows[0], rows[1:]
