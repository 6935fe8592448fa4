"""CSV/JSON persistence for traces, metrics and run summaries.

Floats are written with repr(), the shortest string that round-trips, so the
files are byte-stable for a fixed config and seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .algorithm import RunTrace
from .evaluation import METRIC_COLUMNS, Metrics

TRACE_NAME = "trace.csv"
METRICS_NAME = "metrics.csv"
SUMMARY_NAME = "summary.json"
FAILURE_NAME = "failure.json"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def trace_columns(d: int, m: int) -> list[str]:
    cols = ["t", "i"]
    cols += [f"x{k}" for k in range(d)] + [f"y{k}" for k in range(d)] + [f"q{k}" for k in range(m)]
    cols += ["f"] + [f"g{k}" for k in range(m)]
    cols += [f"a{k}" for k in range(d)] + [f"b{k}" for k in range(m)]
    cols += ["alpha", "beta", "gamma"]
    return cols


def write_trace(path, trace: RunTrace) -> None:
    """One row per (t, i); f and g are f_{i,t}(x_{i,t}) and g_{i,t}(x_{i,t})."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_columns(trace.d, trace.m))
        for k, r in enumerate(trace.records):
            for i in range(trace.n):
                vals = np.concatenate([r.x[i], r.y[i], r.q[i], [trace.f_own[k, i]], trace.g_own[k, i], r.a[i], r.b[i],
                                       [r.alpha, r.beta, r.gamma]])
                w.writerow([str(r.t), str(i)] + [repr(v) for v in vals.tolist()])


@dataclass
class StoredTrace:
    """The parts of a trace that evaluation needs, read back from trace.csv."""

    n: int
    d: int
    m: int
    x: np.ndarray  # (T, n, d)
    f_own: np.ndarray  # (T, n)
    g_own: np.ndarray  # (T, n, m)

    @property
    def T(self) -> int:
        return self.x.shape[0]


def read_trace(path, n: int, d: int, m: int) -> StoredTrace:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header != trace_columns(d, m):
        raise ValueError(f"{path}: unexpected trace columns {header[:6]}...")
    if len(body) % n:
        raise ValueError(f"{path}: {len(body)} rows is not a multiple of n={n}")
    T = len(body) // n
    arr = np.array([[float(v) for v in row] for row in body]).reshape(T, n, len(header)) if body else np.zeros((0, n, len(header)))
    col = {name: k for k, name in enumerate(header)}
    x = arr[:, :, col["x0"]:col["x0"] + d]
    f = arr[:, :, col["f"]]
    g = arr[:, :, col["g0"]:col["g0"] + m]
    return StoredTrace(n, d, m, x, f, g)


def write_metrics(path, metrics: Metrics) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for row in metrics.rows():
            w.writerow([_fmt(v) for v in row])


def read_metrics(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in body]) if body else np.zeros((0, len(header)))
    return {name: data[:, k] for k, name in enumerate(header)}


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
