"""The ``metrics.csv`` stream: ``epoch,phase,metric,value``."""
from __future__ import annotations

import csv
import os
from pathlib import Path

HEADER = ("epoch", "phase", "metric", "value")


def read_metrics(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_metrics(path, rows, phases) -> Path:
    """Replace every row whose phase is in ``phases`` by ``rows``; keep the rest.

    Rows are ``(epoch, phase, metric, value)`` tuples. Rewriting a phase makes
    reruns idempotent, so a rerun leaves a byte-identical file.
    """
    path = Path(path)
    phases = set(phases)
    kept = [
        (r["epoch"], r["phase"], r["metric"], r["value"]) for r in read_metrics(path) if r["phase"] not in phases
    ]
    new = [(str(e), p, m, _fmt(v)) for e, p, m, v in rows]
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(kept + new)
    os.replace(tmp, path)
    return path


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)
