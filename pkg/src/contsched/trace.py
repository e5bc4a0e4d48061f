"""Workload traces: CSV reading/writing and seeded synthetic generation.

CSV layout (UTF-8, header required)::

    id,submit_time_s,duration_s,cpu,mem,priority,burst

``cpu``/``mem`` are normalized machine fractions, ``burst`` is 0 or 1.
"""
from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .model import InvalidInstance, ResourceVector

COLUMNS = ("id", "submit_time_s", "duration_s", "cpu", "mem", "priority", "burst")


class TraceParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class TaskRecord:
    id: str
    submit_time: float
    duration: float
    demand: ResourceVector
    priority: int = 0
    burst: bool = False

    def __post_init__(self) -> None:
        if not math.isfinite(self.submit_time) or self.submit_time < 0:
            raise ValueError(f"task {self.id!r}: submit_time must be >= 0")
        if not math.isfinite(self.duration) or self.duration <= 0:
            raise ValueError(f"task {self.id!r}: duration must be > 0")
        if self.demand.cpu <= 0 and self.demand.mem <= 0:
            raise ValueError(f"task {self.id!r}: zero demand")


@dataclass(frozen=True)
class Trace:
    records: tuple[TaskRecord, ...]
    horizon: float

    def __post_init__(self) -> None:
        recs = tuple(sorted(self.records, key=lambda r: (r.submit_time, r.id)))
        object.__setattr__(self, "records", recs)
        if recs and self.horizon < recs[-1].submit_time:
            raise ValueError("horizon precedes the last submission")

    @classmethod
    def of(cls, records: Iterable[TaskRecord]) -> Trace:
        records = tuple(records)
        return cls(records, max((r.submit_time for r in records), default=0.0))

    def __len__(self) -> int:
        return len(self.records)

    @property
    def num_burst(self) -> int:
        return sum(r.burst for r in self.records)


def _number(raw: str, line: int, column: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise TraceParseError(f"not a number: {raw!r}", line, column) from None
    if not math.isfinite(value):
        raise TraceParseError(f"not finite: {raw!r}", line, column)
    return value


def parse_trace(source: str | Path | TextIO) -> Trace:
    """Read a trace CSV; raises ``TraceParseError`` naming the offending line and column."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return parse_trace(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        return Trace((), 0.0)
    header = [h.strip() for h in header]
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise TraceParseError(f"missing column(s) {', '.join(missing)}", 1, missing[0])
    pos = {c: header.index(c) for c in COLUMNS}

    records = []
    seen = set()
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        cells = {}
        for c in COLUMNS:
            if pos[c] >= len(row) or row[pos[c]].strip() == "":
                raise TraceParseError("missing value", line, c)
            cells[c] = row[pos[c]].strip()
        task_id = cells["id"]
        if task_id in seen:
            raise TraceParseError(f"duplicate id {task_id!r}", line, "id")
        seen.add(task_id)
        submit = _number(cells["submit_time_s"], line, "submit_time_s")
        duration = _number(cells["duration_s"], line, "duration_s")
        if submit < 0:
            raise TraceParseError("negative submit time", line, "submit_time_s")
        if duration <= 0:
            raise TraceParseError("duration must be positive", line, "duration_s")
        cpu = _number(cells["cpu"], line, "cpu")
        mem = _number(cells["mem"], line, "mem")
        try:
            priority = int(cells["priority"])
        except ValueError:
            raise TraceParseError(f"not an integer: {cells['priority']!r}", line, "priority") from None
        if cells["burst"] not in ("0", "1"):
            raise TraceParseError(f"burst must be 0 or 1, got {cells['burst']!r}", line, "burst")
        try:
            demand = ResourceVector(cpu, mem)
            records.append(TaskRecord(task_id, submit, duration, demand, priority, cells["burst"] == "1"))
        except (InvalidInstance, ValueError) as exc:
            raise TraceParseError(str(exc), line, "cpu") from None
    return Trace.of(records)


def format_trace(trace: Trace) -> str:
    buf = io.StringIO()
    write_trace(trace, buf)
    return buf.getvalue()


def write_trace(trace: Trace, dest: str | Path | TextIO) -> None:
    """Write a trace CSV; floats use shortest round-trip repr so parsing is exact."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_trace(trace, fh)
            return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in trace.records:
        writer.writerow([
            r.id, repr(r.submit_time), repr(r.duration), repr(r.demand.cpu), repr(r.demand.mem),
            r.priority, int(r.burst),
        ])


@dataclass(frozen=True)
class SyntheticTraceConfig:
    """Parameters for a synthetic Poisson workload with an optional burst window.

    Demands (cpu, mem) and durations are lognormal, parameterized by their
    median and log-space sigma. Demands are clamped to (0, 1], durations
    to [1 s, horizon].
    """

    num_tasks: int = 500
    base_arrival_rate: float = 1.0
    burst_start: float | None = None
    burst_end: float | None = None
    burst_rate_multiplier: float = 1.0
    cpu_median: float = 0.05
    cpu_sigma: float = 0.8
    mem_median: float = 0.05
    mem_sigma: float = 0.8
    duration_median: float = 60.0
    duration_sigma: float = 1.0
    num_priorities: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_tasks < 0:
            raise ValueError("num_tasks must be >= 0")
        if not self.base_arrival_rate > 0:
            raise ValueError("base_arrival_rate must be > 0")
        if (self.burst_start is None) != (self.burst_end is None):
            raise ValueError("burst_start and burst_end must be given together")
        if self.burst_start is not None and not 0 <= self.burst_start < self.burst_end:
            raise ValueError("burst window needs 0 <= start < end")
        if not self.burst_rate_multiplier >= 1:
            raise ValueError("burst_rate_multiplier must be >= 1")
        for name in ("cpu_median", "mem_median", "duration_median"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("cpu_sigma", "mem_sigma", "duration_sigma"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if self.num_priorities < 1:
            raise ValueError("num_priorities must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def burst_window(self) -> tuple[float, float] | None:
        if self.burst_start is None:
            return None
        return (self.burst_start, self.burst_end)

    def in_burst(self, t: float) -> bool:
        w = self.burst_window
        return w is not None and w[0] <= t < w[1]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_file(cls, path: str | Path) -> SyntheticTraceConfig:
        """Load ``key = value`` lines (``#`` comments allowed); keys are field names."""
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.read_string("[trace]\n" + Path(path).read_text(encoding="utf-8"))
        return cls.from_mapping(dict(parser["trace"]))

    @classmethod
    def from_mapping(cls, values: dict) -> SyntheticTraceConfig:
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"unknown trace config key {key!r}")
            if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none")):
                kwargs[key] = None
            elif key in ("num_tasks", "num_priorities", "seed"):
                kwargs[key] = int(raw)
            else:
                kwargs[key] = float(raw)
        return cls(**kwargs)


def _arrival_times(cfg: SyntheticTraceConfig, rng: np.random.Generator) -> np.ndarray:
    """Inhomogeneous Poisson arrivals by inverting the cumulative rate function."""
    op = np.cumsum(rng.exponential(1.0, size=cfg.num_tasks)) / cfg.base_arrival_rate
    if cfg.burst_window is None or cfg.burst_rate_multiplier == 1:
        return op
    a, b = cfg.burst_window
    mult = cfg.burst_rate_multiplier
    # op is cumulative intensity divided by the base rate
    inside_end = a + mult * (b - a)
    return np.where(op < a, op, np.where(op < inside_end, a + (op - a) / mult, b + (op - inside_end)))


def _lognormal(rng: np.random.Generator, median: float, sigma: float, n: int) -> np.ndarray:
    return median * np.exp(sigma * rng.standard_normal(n))


def generate_synthetic_trace(cfg: SyntheticTraceConfig) -> Trace:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.num_tasks
    submits = np.round(_arrival_times(cfg, rng), 3)
    cpu = np.clip(np.round(_lognormal(rng, cfg.cpu_median, cfg.cpu_sigma, n), 6), 1e-6, 1.0)
    mem = np.clip(np.round(_lognormal(rng, cfg.mem_median, cfg.mem_sigma, n), 6), 1e-6, 1.0)
    horizon = float(submits[-1]) if n else 0.0
    durations = np.clip(
        np.round(_lognormal(rng, cfg.duration_median, cfg.duration_sigma, n), 3), 1.0, max(1.0, horizon)
    )
    priorities = rng.integers(0, cfg.num_priorities, size=n)
    width = max(6, len(str(n)))
    records = [
        TaskRecord(
            id=f"t{i:0{width}d}",
            submit_time=float(submits[i]),
            duration=float(durations[i]),
            demand=ResourceVector(float(cpu[i]), float(mem[i])),
            priority=int(priorities[i]),
            burst=cfg.in_burst(float(submits[i])),
        )
        for i in range(n)
    ]
    return Trace(tuple(records), horizon)
