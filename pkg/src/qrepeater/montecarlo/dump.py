"""Raw-trial dump: tab-separated columns for offline analysis.

Layout::

    # qrepeater-trials v1
    # kind=<trials|attempts>
    # t0_s=<float>
    <tab-separated header>
    <one row per trial, or per generation attempt>

``trials`` rows: trial, attempts, time_units, total_time_s, final_alpha, done.
``attempts`` rows: trial, attempt, n1, n2, n_max, n_dif, success.
Floats are written with round-trip precision.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .engine import EstimatorReport

MAGIC = "# qrepeater-trials v1"
TRIAL_COLUMNS = ("trial", "attempts", "time_units", "total_time_s", "final_alpha", "done")
ATTEMPT_COLUMNS = ("trial", "attempt", "n1", "n2", "n_max", "n_dif", "success")


def write_trial_dump(path, report: EstimatorReport, kind: str = "trials") -> Path:
    table = report.trials
    if table is None:
        raise ValueError("report carries no trial table")
    path = Path(path)
    if kind == "trials":
        c = table.columns
        n = len(table)
        cols = [np.arange(n), c["attempts"], c["time_units"], c["time_units"] * table.t0_s, c["alpha"],
                c["done"].astype(int)]
        header = TRIAL_COLUMNS
    elif kind == "attempts":
        if table.attempt_log is None:
            raise ValueError("attempt log was not recorded")
        log = table.attempt_log
        order = np.lexsort((log["attempt"], log["trial"]))
        n1, n2 = log["n1"][order], log["n2"][order]
        cols = [log["trial"][order], log["attempt"][order], n1, n2, np.maximum(n1, n2), np.abs(n1 - n2),
                log["success"][order].astype(int)]
        header = ATTEMPT_COLUMNS
    else:
        raise ValueError(f"unknown dump kind {kind!r}")
    with path.open("w", newline="") as fh:
        fh.write(f"{MAGIC}\n# kind={kind}\n# t0_s={table.t0_s!r}\n")
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(header)
        for row in zip(*(col.tolist() for col in cols)):
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def read_trial_dump(path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    meta: dict[str, str] = {}
    with Path(path).open() as fh:
        first = fh.readline().rstrip("\n")
        if first != MAGIC:
            raise ValueError(f"{path}: not a qrepeater trial dump")
        line = fh.readline()
        while line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
            line = fh.readline()
        header = line.rstrip("\n").split("\t")
        rows = list(csv.reader(fh, delimiter="\t"))
    data = {}
    for i, name in enumerate(header):
        values = [row[i] for row in rows]
        if name in ("total_time_s", "final_alpha"):
            data[name] = np.array([float(v) for v in values])
        else:
            data[name] = np.array([int(v) for v in values], dtype=np.int64)
    return meta, data
