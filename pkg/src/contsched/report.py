"""Fixed-format CSV tables and JSON payloads for simulation results.

Every float is written with ``DECIMALS`` places so outputs are byte-stable
across runs; missing values are written as ``NA``.
"""
from __future__ import annotations

import csv
import io
import json
from typing import Sequence

DECIMALS = 4
TABLE1_COLUMNS = ("strategy", "avg_utilization_pct", "load_stddev_pct")
TABLE2_COLUMNS = ("strategy", "burst_completion_rate_pct", "avg_wait_s")
TIMELINE_COLUMNS = ("time_s", "utilization_pct", "load_stddev_pct")


def fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return f"{value:.{DECIMALS}f}"
    return str(value)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def table1_csv(results) -> str:
    """Utilization and imbalance per strategy; ``results`` is ``[(name, result), ...]``."""
    return _csv(TABLE1_COLUMNS, ((name, r.avg_utilization_pct, r.load_stddev_pct) for name, r in results))


def table2_csv(results) -> str:
    return _csv(TABLE2_COLUMNS, ((name, r.burst_completion_rate_pct, r.avg_wait_s) for name, r in results))


def timeline_csv(result) -> str:
    return _csv(TIMELINE_COLUMNS, ((t, 100.0 * u, 100.0 * l) for t, u, l in result.timeline))


def dumps(payload) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
