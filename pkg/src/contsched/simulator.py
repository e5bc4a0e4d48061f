"""Discrete-event replay of a task trace against a fixed node pool.

Events are processed in timestamp order; all events sharing a timestamp
form one batch, completions first so freed capacity is visible to
same-instant arrivals.  After each batch the chosen strategy places what it
can from the FIFO wait queue.  Running tasks are never migrated.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .baselines import Packer, heuristic_schedule, least_utilized_fit, static_rule_schedule
from .ga import GaConfig, evolve
from .model import Container, Node, ProblemInstance, ResourceVector, is_feasible
from .objective import ObjectiveWeights, objective_value, summarize, utilization_from_loads
from .trace import Trace

STRATEGIES = ("static", "heuristic", "ga")
CAPACITY_TOL = 1e-9
SIM_GA_DEFAULT = GaConfig(population_size=50, generations=100)


class CapacityViolation(AssertionError):
    pass


@dataclass(frozen=True)
class SimConfig:
    strategy: str = "static"
    ga_config: GaConfig = SIM_GA_DEFAULT
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    burst_deadline: float | None = None
    sample_interval: float = 1.0
    horizon: float | None = None  # None: run until every placeable task finishes
    check_invariants: bool = True

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if not self.sample_interval > 0:
            raise ValueError("sample_interval must be > 0")
        if self.burst_deadline is not None and not self.burst_deadline > 0:
            raise ValueError("burst_deadline must be > 0")
        if self.horizon is not None and self.horizon < 0:
            raise ValueError("horizon must be >= 0")


@dataclass(frozen=True)
class TaskOutcome:
    id: str
    wait_s: float | None  # None if the task never started
    completed: bool  # finished by the end of the run
    on_time: bool  # completed, and within the burst deadline when one applies
    burst: bool
    node: int | None


@dataclass(frozen=True)
class SimResult:
    strategy: str
    avg_utilization_pct: float
    load_stddev_pct: float
    burst_completion_rate_pct: float | None
    avg_wait_s: float
    avg_wait_all_s: float
    avg_wait_burst_s: float | None
    end_time: float
    counts: dict
    per_task: tuple[TaskOutcome, ...]
    timeline: tuple[tuple[float, float, float], ...]

    def to_dict(self, with_tasks: bool = True, with_timeline: bool = False) -> dict:
        out = {
            "strategy": self.strategy,
            "avg_utilization_pct": self.avg_utilization_pct,
            "load_stddev_pct": self.load_stddev_pct,
            "burst_completion_rate_pct": self.burst_completion_rate_pct,
            "avg_wait_s": self.avg_wait_s,
            "avg_wait_all_s": self.avg_wait_all_s,
            "avg_wait_burst_s": self.avg_wait_burst_s,
            "end_time": self.end_time,
            "counts": dict(self.counts),
        }
        if with_tasks:
            out["per_task"] = [
                {"id": t.id, "wait_s": t.wait_s, "completed": t.completed, "on_time": t.on_time}
                for t in self.per_task
            ]
        if with_timeline:
            out["timeline"] = [list(s) for s in self.timeline]
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(**kwargs), indent=2, sort_keys=True)


def round_seed(base: int, round_index: int) -> int:
    return int(np.random.SeedSequence([base, round_index]).generate_state(1, np.uint64)[0])


class _Cluster:
    def __init__(self, nodes: Sequence[Node]):
        self.nodes = tuple(nodes)
        self.capacities = np.array([n.capacity.as_tuple() for n in self.nodes], dtype=float)
        self.running: list[dict[int, ResourceVector]] = [{} for _ in self.nodes]
        self.loads = np.zeros((len(self.nodes), 2))

    def refresh(self, j: int) -> None:
        total = ResourceVector.total(self.running[j].values())
        self.loads[j] = total.as_tuple()

    def base_load(self) -> tuple[ResourceVector, ...]:
        return tuple(ResourceVector(*row) for row in self.loads.tolist())

    def start(self, task: int, j: int, demand: ResourceVector) -> None:
        self.running[j][task] = demand
        self.refresh(j)

    def finish(self, task: int, j: int) -> None:
        del self.running[j][task]
        self.refresh(j)

    def utilization(self) -> tuple[float, float]:
        u, l = summarize(utilization_from_loads(self.loads, self.capacities))
        return float(u), float(l)

    def check(self) -> None:
        over = self.loads - self.capacities
        if (over > CAPACITY_TOL).any():
            j = int(np.argwhere(over > CAPACITY_TOL)[0][0])
            raise CapacityViolation(f"node {self.nodes[j].id} load {self.loads[j]} exceeds capacity")


class Simulation:
    """One replay run; use :func:`run_simulation` unless you need the internals."""

    def __init__(self, trace: Trace, nodes: Sequence[Node], cfg: SimConfig):
        if not nodes:
            raise ValueError("the node pool is empty")
        self.trace = trace
        self.cfg = cfg
        self.cluster = _Cluster(nodes)
        self.ga_cfg = replace(cfg.ga_config, weights=cfg.weights)
        self.records = trace.records
        self.containers = [Container(r.id, r.demand) for r in self.records]
        self.queue: list[int] = []
        self.start_time: dict[int, float] = {}
        self.finish_time: dict[int, float] = {}
        self.node_of: dict[int, int] = {}
        self.never_placeable: set[int] = set()
        self.rounds = 0
        self.changes: list[tuple[float, float, float]] = [(0.0, 0.0, 0.0)]
        self.on_event = None  # optional hook(sim, time) after every event batch

    def placeable(self, i: int) -> bool:
        d = self.records[i].demand
        return any(d <= n.capacity for n in self.cluster.nodes)

    # -- placement ---------------------------------------------------------

    def _queue_instance(self, tasks: Sequence[int]) -> ProblemInstance:
        return ProblemInstance(
            tuple(self.containers[i] for i in tasks), self.cluster.nodes, self.cluster.base_load()
        )

    def _any_fits(self) -> list[int]:
        """Queued tasks that fit on some node right now, in queue order."""
        if not self.queue:
            return []
        demands = np.array([self.records[i].demand.as_tuple() for i in self.queue])
        residual = self.cluster.capacities - self.cluster.loads + CAPACITY_TOL
        ok = (demands[:, None, :] <= residual[None, :, :]).all(axis=2).any(axis=1)
        return [i for i, fit in zip(self.queue, ok) if fit]

    def _place(self, now: float) -> None:
        if not self._any_fits():
            return
        strategy = self.cfg.strategy
        if strategy == "ga":
            placed = self._place_ga()
        else:
            inst = self._queue_instance(self.queue)
            if strategy == "static":
                placement = static_rule_schedule(inst)
            else:
                placement = heuristic_schedule(inst, presorted=True)
            placed = [(self.queue[q], j) for q, j in enumerate(placement.mapping) if j is not None]
        self._start(placed, now)

    def _place_ga(self) -> list[tuple[int, int]]:
        """One GA round over the head of the queue, then in-order admission.

        The batch is the queued tasks that fit somewhere right now, taken in
        queue order while their summed demand stays within the cluster's free
        capacity.  The GA places them on the real nodes with running work as
        base load, so its objective scores the whole cluster.  Admission walks
        the queue in order: a task keeps its planned node if that node still
        has room, otherwise (or if it was outside the batch) it goes to the
        least-utilized node that fits, if any.
        """
        free = (self.cluster.capacities - self.cluster.loads).sum(axis=0)
        batch, used = [], np.zeros(2)
        for i in self._any_fits():
            d = np.array(self.records[i].demand.as_tuple())
            if batch and ((used + d) > free).any():
                break
            batch.append(i)
            used += d
        inst = self._queue_instance(batch)
        outcome = evolve(inst, replace(self.ga_cfg, seed=round_seed(self.ga_cfg.seed, self.rounds)))
        self.rounds += 1
        plan = dict(zip(batch, outcome.best.mapping))

        packer = Packer(self._queue_instance(()))
        placed = []
        for i in self.queue:
            d = self.records[i].demand
            j = plan.get(i)
            if j is None or not packer.fits(j, d):
                j = least_utilized_fit(packer, d)
            if j is not None:
                packer.place(j, d)
                placed.append((i, j))
        return placed

    def _start(self, placed: list[tuple[int, int]], now: float) -> None:
        started = {i for i, _ in placed}
        for i, j in placed:
            self.cluster.start(i, j, self.records[i].demand)
            self.start_time[i] = now
            self.node_of[i] = j
            heapq.heappush(self._completions, (now + self.records[i].duration, self.records[i].id, i))
        self.queue = [i for i in self.queue if i not in started]

    # -- main loop ---------------------------------------------------------

    def run(self) -> SimResult:
        self._completions: list[tuple[float, str, int]] = []
        horizon = self.cfg.horizon
        next_arrival = 0
        n = len(self.records)
        now = 0.0
        while next_arrival < n or self._completions:
            t_arr = self.records[next_arrival].submit_time if next_arrival < n else math.inf
            t_done = self._completions[0][0] if self._completions else math.inf
            now = min(t_arr, t_done)
            if horizon is not None and now > horizon:
                break
            while self._completions and self._completions[0][0] == now:
                _, _, i = heapq.heappop(self._completions)
                self.cluster.finish(i, self.node_of[i])
                self.finish_time[i] = now
            while next_arrival < n and self.records[next_arrival].submit_time == now:
                if self.placeable(next_arrival):
                    self.queue.append(next_arrival)
                else:
                    self.never_placeable.add(next_arrival)
                next_arrival += 1
            self._place(now)
            if self.cfg.check_invariants:
                self.cluster.check()
            self.changes.append((now, *self.cluster.utilization()))
            if self.on_event:
                self.on_event(self, now)
        end = horizon if horizon is not None else now
        if not self.records:
            end = 0.0
        return self._result(end)

    # -- metrics -----------------------------------------------------------

    def _timeline(self, end: float) -> tuple[list[tuple[float, float, float]], float, float]:
        dt = self.cfg.sample_interval
        count = math.ceil(end / dt) if end > 0 else 0
        times = [s * dt for s in range(count + 1)]
        change_t = [c[0] for c in self.changes]
        samples = []
        for s in times:
            # state in force at s: last batch processed at or before s
            idx = int(np.searchsorted(change_t, s, side="right")) - 1
            _, u, l = self.changes[idx]
            samples.append((s, u, l))
        if count == 0:
            return samples, 0.0, 0.0
        body = samples[:count]
        return samples, math.fsum(x[1] for x in body) / count, math.fsum(x[2] for x in body) / count

    def _result(self, end: float) -> SimResult:
        deadline = self.cfg.burst_deadline
        outcomes = []
        waits_all, waits_burst, burst_on_time, burst_total = [], [], 0, 0
        for i, r in enumerate(self.records):
            started = i in self.start_time
            wait = self.start_time[i] - r.submit_time if started else None
            completed = i in self.finish_time and self.finish_time[i] <= end
            on_time = completed and (
                not r.burst or deadline is None or self.finish_time[i] - r.submit_time <= deadline
            )
            outcomes.append(TaskOutcome(r.id, wait, completed, on_time, r.burst, self.node_of.get(i)))
            if started:
                waits_all.append(wait)
                if r.burst:
                    waits_burst.append(wait)
            if r.burst:
                burst_total += 1
                burst_on_time += on_time

        counts = {
            "tasks": len(self.records),
            "completed": sum(o.completed for o in outcomes),
            "running_at_horizon": sum(1 for i in self.start_time if i not in self.finish_time),
            "queued_at_horizon": len(self.queue),
            "never_placeable": len(self.never_placeable),
            "not_yet_arrived": sum(
                1 for i in range(len(self.records))
                if i not in self.start_time and i not in self.never_placeable and i not in self.queue
            ),
        }
        timeline, u_avg, l_avg = self._timeline(end)
        avg_all = math.fsum(waits_all) / len(waits_all) if waits_all else 0.0
        avg_burst = math.fsum(waits_burst) / len(waits_burst) if waits_burst else None
        return SimResult(
            strategy=self.cfg.strategy,
            avg_utilization_pct=100.0 * u_avg,
            load_stddev_pct=100.0 * l_avg,
            burst_completion_rate_pct=100.0 * burst_on_time / burst_total if burst_total else None,
            avg_wait_s=avg_burst if burst_total else avg_all,
            avg_wait_all_s=avg_all,
            avg_wait_burst_s=avg_burst,
            end_time=end,
            counts=counts,
            per_task=tuple(outcomes),
            timeline=tuple(timeline),
        )


def run_simulation(trace: Trace, nodes: Sequence[Node], cfg: SimConfig) -> SimResult:
    return Simulation(trace, nodes, cfg).run()


def compare_strategies(
    trace: Trace, nodes: Sequence[Node], configs: Sequence[SimConfig]
) -> list[tuple[str, SimResult]]:
    """Run every config on the same inputs; results come back in static/heuristic/ga order."""
    ordered = sorted(configs, key=lambda c: STRATEGIES.index(c.strategy))
    return [(c.strategy, run_simulation(trace, nodes, c)) for c in ordered]


@dataclass(frozen=True)
class SnapshotResult:
    """One-shot placement of a whole trace, scored once (no time dimension)."""

    strategy: str
    avg_utilization_pct: float
    load_stddev_pct: float
    placed: int
    unplaced: int
    feasible: bool

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "avg_utilization_pct": self.avg_utilization_pct,
            "load_stddev_pct": self.load_stddev_pct,
            "placed": self.placed,
            "unplaced": self.unplaced,
            "feasible": self.feasible,
        }


def snapshot_placement(trace: Trace, nodes: Sequence[Node], cfg: SimConfig) -> SnapshotResult:
    """Place every task of ``trace`` at once on empty nodes and score the result.

    The baselines leave what does not fit unplaced and are scored on what
    they placed.  The GA always assigns every task (it never leaves work
    out), so on an oversubscribed trace its answer is infeasible and
    utilization can exceed 100%; ``feasible`` reports that.
    """
    inst = ProblemInstance(tuple(Container(r.id, r.demand) for r in trace.records), tuple(nodes))
    if cfg.strategy == "ga":
        a = evolve(inst, replace(cfg.ga_config, weights=cfg.weights)).best
        placed_inst, unplaced = inst, 0
    else:
        schedule = static_rule_schedule if cfg.strategy == "static" else heuristic_schedule
        placement = schedule(inst)
        placed_inst, a = placement.placed_subinstance(inst)
        unplaced = len(placement.unplaced)
    b = objective_value(placed_inst, a, cfg.weights)
    return SnapshotResult(
        strategy=cfg.strategy,
        avg_utilization_pct=100.0 * b.mean_utilization,
        load_stddev_pct=100.0 * b.imbalance,
        placed=placed_inst.num_containers,
        unplaced=unplaced,
        feasible=is_feasible(placed_inst, a),
    )


def compare_snapshot(
    trace: Trace, nodes: Sequence[Node], configs: Sequence[SimConfig]
) -> list[tuple[str, SnapshotResult]]:
    ordered = sorted(configs, key=lambda c: STRATEGIES.index(c.strategy))
    return [(c.strategy, snapshot_placement(trace, nodes, c)) for c in ordered]


def static_sojourn_quantile(trace: Trace, nodes: Sequence[Node], q: float, sample_interval: float = 1.0) -> float:
    """``q``-quantile of burst-task sojourn (wait + run time) under the static rule.

    Using it as the burst deadline makes the static strategy finish about a
    ``q`` share of burst tasks on time, which calibrates deadline-based
    comparisons to a given trace.
    """
    result = run_simulation(trace, nodes, SimConfig(strategy="static", sample_interval=sample_interval))
    sojourns = [
        o.wait_s + r.duration
        for o, r in zip(result.per_task, trace.records)
        if r.burst and o.wait_s is not None
    ]
    if not sojourns:
        raise ValueError("trace has no started burst tasks")
    return float(np.quantile(sojourns, q))
