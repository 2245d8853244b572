"""Result rows and CSV emission.

One row per evaluated point; a summary is carried as '# key=value'
comment lines before the header so every file is self-describing.
Floats are written with 17 significant digits so reading a file back
reproduces each value bitwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields

import numpy as np

_FLOAT_FIELDS = ("d_B", "d_D", "lower_bound", "upper_bound", "p")
_INT_FIELDS = ("point_index", "true_label", "predicted", "clean_correct",
               "is_exact", "regions_explored", "used_box")


@dataclass
class ResultRow:
    point_index: int
    true_label: int
    predicted: int
    clean_correct: int
    status: str
    d_B: float
    d_D: float
    lower_bound: float
    is_exact: int
    upper_bound: float
    regions_explored: int
    p: float
    used_box: int


COLUMNS = tuple(f.name for f in fields(ResultRow))


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_results(path, rows, summary: dict = None):
    with open(path, "w", newline="") as fh:
        for key, value in (summary or {}).items():
            fh.write(f"# {key}={_fmt(value)}\n")
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, c)) for c in COLUMNS])


def _parse_summary_value(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_results(path):
    """Returns (rows, summary)."""
    summary = {}
    rows = []
    with open(path, newline="") as fh:
        data_lines = []
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    summary[key.strip()] = _parse_summary_value(value.strip())
                continue
            data_lines.append(line)
    reader = csv.reader(data_lines)
    header = next(reader, None)
    if header is None:
        return rows, summary
    if tuple(header) != COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    for rec in reader:
        kwargs = {}
        for name, value in zip(COLUMNS, rec):
            if name in _INT_FIELDS:
                kwargs[name] = int(value)
            elif name in _FLOAT_FIELDS:
                kwargs[name] = float(value)
            else:
                kwargs[name] = value
        rows.append(ResultRow(**kwargs))
    return rows, summary


def summarize(rows, eps: float = None) -> dict:
    """Aggregate statistics over rows; every number is recomputable from
    the rows themselves.  ``certified_robust_error`` counts points whose
    lower bound fails to reach eps (or that are not cleanly correct);
    ``empirical_robust_error`` counts points whose upper bound is at most
    eps."""
    n = len(rows)
    out = {"n_points": n}
    if n == 0:
        return out
    lows = np.array([r.lower_bound for r in rows])
    ups = np.array([r.upper_bound for r in rows])
    clean = np.array([r.clean_correct for r in rows], dtype=bool)
    bad_status = np.array([r.status in ("MISCLASSIFIED", "DEGENERATE") for r in rows])
    out["test_error"] = float(np.mean(~clean))
    out["pct_exact"] = 100.0 * float(np.mean([r.is_exact for r in rows]))
    out["median_lower_bound"] = float(np.median(lows))
    finite_ups = ups[np.isfinite(ups)]
    out["median_upper_bound"] = (float(np.median(finite_ups))
                                 if finite_ups.size else math.inf)
    if eps is not None:
        out["eps"] = float(eps)
        out["certified_robust_error"] = float(np.mean(bad_status | (lows < eps)))
        out["empirical_robust_error"] = float(np.mean(~clean | (ups <= eps)))
    violations = int(np.sum(lows > ups + 1e-9))
    out["sandwich_violations"] = violations
    return out
