"""Deterministic CSV, JSON, markdown and gnuplot emitters."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

LADDER_COLUMNS = ("epsilon", "l1_defect")
BUDGET_COLUMNS = ("t", "H", "flux")
REGULARITY_COLUMNS = ("quantity", "scale", "value")


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(payload) -> str:
    return json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"


def write_json(path, payload):
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps(payload), encoding="utf-8")


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(_csv_text(header, rows), encoding="utf-8")


def ladder_rows(ladder):
    n_phi = ladder.pairings.shape[1]
    header = list(LADDER_COLUMNS) + [f"pairing_phi{i}" for i in range(n_phi)]
    rows = [
        [float(e), float(l1)] + [float(v) for v in pairs]
        for e, l1, pairs in zip(ladder.epsilons, ladder.l1_norms, ladder.pairings)
    ]
    return header, rows


def gnuplot_loglog(csv_name, xcol, ycol, title):
    """Plot script text for a log-log curve from a CSV file (no rendering here)."""
    return (
        "set datafile separator ','\n"
        "set logscale xy\n"
        f"set title '{title}'\n"
        f"plot '{csv_name}' using {xcol}:{ycol} skip 1 with linespoints notitle\n"
    )


def markdown_table(summaries):
    """One row per report: command, config hash, and its headline result."""
    lines = ["| source | command | config hash | result |", "| --- | --- | --- | --- |"]
    for name, rep in summaries:
        lines.append(
            f"| {name} | {rep.get('command', '?')} | {rep.get('config_hash', '?')} | {headline(rep)} |"
        )
    return "\n".join(lines) + "\n"


def headline(rep):
    res = rep.get("results", {})
    for key in ("verdict", "passed", "max_residual", "flux"):
        if key in res:
            return f"{key}={res[key]}"
    return ""
