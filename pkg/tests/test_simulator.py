import pickle

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contsched.ga import GaConfig
from contsched.model import Node, ResourceVector
from contsched.simulator import (
    CAPACITY_TOL,
    SimConfig,
    compare_snapshot,
    compare_strategies,
    round_seed,
    run_simulation,
    Simulation,
    static_sojourn_quantile,
)
from contsched.trace import SyntheticTraceConfig, TaskRecord, Trace, generate_synthetic_trace

TINY_GA = GaConfig(population_size=8, generations=5)


def task(i, submit, duration, cpu, mem, burst=False):
    return TaskRecord(f"t{i:03d}", float(submit), float(duration), ResourceVector(cpu, mem), 0, burst)


def nodes_of(*caps):
    return tuple(Node(f"n{j}", ResourceVector(*c)) for j, c in enumerate(caps))


def sim(trace, nodes, strategy="static", **kw):
    kw.setdefault("ga_config", TINY_GA)
    return run_simulation(trace, nodes, SimConfig(strategy=strategy, **kw))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(strategy="random")
    with pytest.raises(ValueError):
        SimConfig(sample_interval=0)
    with pytest.raises(ValueError):
        SimConfig(burst_deadline=-1)


@pytest.mark.parametrize("strategy", ["static", "heuristic", "ga"])
def test_empty_trace_gives_zero_metrics(strategy):
    r = sim(Trace((), 0.0), nodes_of((1, 1)), strategy)
    assert (r.avg_utilization_pct, r.load_stddev_pct, r.avg_wait_s, r.end_time) == (0, 0, 0, 0)
    assert r.burst_completion_rate_pct is None
    assert r.counts["tasks"] == 0


@pytest.mark.parametrize("strategy", ["static", "heuristic", "ga"])
def test_single_task_timeline(strategy):
    r = sim(Trace.of([task(0, 0, 10, 0.5, 0.5)]), nodes_of((1, 1)), strategy)
    assert r.avg_utilization_pct == pytest.approx(50.0, abs=1e-9)
    assert r.load_stddev_pct == 0
    assert r.end_time == 10
    assert r.per_task[0].wait_s == 0
    assert len(r.timeline) == 11
    assert r.timeline[-1][1] == 0


def test_second_task_waits_for_capacity():
    trace = Trace.of([task(0, 0, 10, 0.6, 0.6), task(1, 2, 5, 0.6, 0.6)])
    r = sim(trace, nodes_of((1, 1)))
    assert [t.wait_s for t in r.per_task] == [0, 8]
    assert r.end_time == 15
    assert r.avg_wait_all_s == 4


def test_completion_frees_capacity_for_same_instant_arrival():
    trace = Trace.of([task(0, 0, 5, 0.8, 0.8), task(1, 5, 5, 0.8, 0.8)])
    r = sim(trace, nodes_of((1, 1)))
    assert r.per_task[1].wait_s == 0


def test_never_placeable_task_is_counted_not_queued():
    trace = Trace.of([task(0, 0, 5, 2.0, 0.1), task(1, 1, 5, 0.2, 0.2)])
    r = sim(trace, nodes_of((1, 1), (1, 1)), "heuristic")
    assert r.counts["never_placeable"] == 1
    assert r.counts["completed"] == 1
    assert r.per_task[0].wait_s is None and not r.per_task[0].completed


def test_burst_deadline():
    trace = Trace.of([
        task(0, 0, 10, 0.6, 0.6, burst=True),
        task(1, 0, 10, 0.6, 0.6, burst=True),
        task(2, 0, 1, 0.1, 0.1),
    ])
    nodes = nodes_of((1, 1))
    tight = sim(trace, nodes, burst_deadline=15)
    assert tight.burst_completion_rate_pct == 50
    assert tight.avg_wait_burst_s == 5
    assert tight.avg_wait_s == tight.avg_wait_burst_s
    loose = sim(trace, nodes)
    assert loose.burst_completion_rate_pct == 100


def test_horizon_cuts_run():
    trace = Trace((task(0, 0, 10, 0.6, 0.6), task(1, 1, 10, 0.6, 0.6), task(2, 50, 1, 0.1, 0.1)), 50.0)
    r = sim(trace, nodes_of((1, 1)), horizon=5)
    assert r.end_time == 5
    assert r.counts == {
        "tasks": 3, "completed": 0, "running_at_horizon": 1, "queued_at_horizon": 1,
        "never_placeable": 0, "not_yet_arrived": 1,
    }


def test_static_is_first_fit_and_heuristic_spreads():
    trace = Trace.of([task(i, 0, 10, 0.2, 0.2) for i in range(3)])
    nodes = nodes_of((1, 1), (1, 1), (1, 1))
    assert [t.node for t in sim(trace, nodes, "static").per_task] == [0, 0, 0]
    assert sorted(t.node for t in sim(trace, nodes, "heuristic").per_task) == [0, 1, 2]
    r = sim(trace, nodes, "static")
    # one node at 20% x 3 tasks, two idle
    assert r.avg_utilization_pct == pytest.approx(20.0, abs=1e-9)
    assert r.load_stddev_pct == pytest.approx(100 * np.std([0.6, 0, 0]), abs=1e-9)


def test_round_seeds_differ_per_round():
    seeds = {round_seed(7, i) for i in range(100)}
    assert len(seeds) == 100
    assert round_seed(7, 3) == round_seed(7, 3)


def test_result_json_is_stable():
    trace = generate_synthetic_trace(SyntheticTraceConfig(num_tasks=40, seed=2))
    nodes = nodes_of((1, 1), (0.5, 0.5))
    assert sim(trace, nodes, "ga").to_json() == sim(trace, nodes, "ga").to_json()


def test_compare_order_and_identity():
    trace = generate_synthetic_trace(SyntheticTraceConfig(num_tasks=40, seed=4))
    nodes = nodes_of((1, 1), (0.5, 0.5), (0.5, 1))
    cfgs = [SimConfig(strategy=s, ga_config=TINY_GA) for s in ("ga", "static", "heuristic")]
    out = compare_strategies(trace, nodes, cfgs)
    assert [name for name, _ in out] == ["static", "heuristic", "ga"]
    assert pickle.dumps(out) == pickle.dumps(compare_strategies(trace, nodes, cfgs))


def test_snapshot_mode():
    trace = Trace.of([task(i, i, 10, 0.3, 0.3) for i in range(4)])
    nodes = nodes_of((1, 1), (1, 1))
    out = dict(compare_snapshot(trace, nodes, [SimConfig(strategy=s, ga_config=TINY_GA) for s in ("static", "heuristic", "ga")]))
    # first fit stacks three on the first node (0.9) and one on the second (0.3)
    assert (out["static"].placed, out["static"].unplaced) == (4, 0)
    assert out["static"].avg_utilization_pct == pytest.approx(60.0)
    assert out["static"].load_stddev_pct == pytest.approx(30.0)
    assert out["heuristic"].load_stddev_pct == pytest.approx(0.0, abs=1e-9)
    assert out["ga"].placed == 4 and out["ga"].feasible

    crowded = Trace.of([task(i, i, 10, 0.3, 0.3) for i in range(7)])
    full = dict(compare_snapshot(crowded, nodes, [SimConfig(strategy="static")]))["static"]
    assert (full.placed, full.unplaced) == (6, 1)


def test_sojourn_quantile_calibrates_static_completion():
    cfg = SyntheticTraceConfig(num_tasks=300, base_arrival_rate=0.5, burst_start=100, burst_end=200,
                               burst_rate_multiplier=5, seed=1)
    trace = generate_synthetic_trace(cfg)
    nodes = nodes_of((1, 1), (0.5, 0.5), (0.75, 0.5))
    dl = static_sojourn_quantile(trace, nodes, 0.7)
    rate = sim(trace, nodes, burst_deadline=dl).burst_completion_rate_pct
    assert 60 <= rate <= 80


# -- properties over random small traces -----------------------------------------

@st.composite
def scenarios(draw):
    n = draw(st.integers(0, 14))
    recs = []
    for i in range(n):
        recs.append(task(
            i,
            draw(st.integers(0, 15)),
            draw(st.integers(1, 8)),
            draw(st.floats(0.01, 1.2)),
            draw(st.floats(0.01, 1.2)),
            draw(st.booleans()),
        ))
    k = draw(st.integers(1, 3))
    caps = draw(st.lists(st.tuples(st.floats(0.3, 1), st.floats(0.3, 1)), min_size=k, max_size=k))
    strategy = draw(st.sampled_from(["static", "heuristic", "ga"]))
    horizon = draw(st.one_of(st.none(), st.integers(0, 20)))
    seed = draw(st.integers(0, 2**32))
    return Trace.of(recs), nodes_of(*caps), SimConfig(
        strategy=strategy, ga_config=GaConfig(population_size=6, generations=3, seed=seed),
        horizon=horizon, burst_deadline=draw(st.one_of(st.none(), st.floats(1, 20))),
    )


def _watched(trace, nodes, cfg):
    s = Simulation(trace, nodes, cfg)
    events = []

    def hook(sim, now):
        cluster = sim.cluster
        # independent recomputation of per-node load from the running sets
        for j, running in enumerate(cluster.running):
            cpu = sum(d.cpu for d in running.values())
            mem = sum(d.mem for d in running.values())
            assert cpu <= cluster.capacities[j][0] + CAPACITY_TOL
            assert mem <= cluster.capacities[j][1] + CAPACITY_TOL
        if cfg.strategy != "ga":
            started_now = [i for i, t in sim.start_time.items() if t == now]
            if started_now:
                last = max(started_now)
                residual = cluster.capacities - cluster.loads
                for i in sim.queue:
                    if i < last:
                        d = np.array(trace.records[i].demand.as_tuple())
                        assert not (d <= residual + CAPACITY_TOL).all(axis=1).any()
        events.append(now)

    s.on_event = hook
    return s.run(), events


@settings(max_examples=1000, deadline=None)
@given(scenarios())
def test_capacity_safe_at_every_event(case):
    trace, nodes, cfg = case
    _, events = _watched(trace, nodes, cfg)
    assert events == sorted(events)


@settings(max_examples=1000, deadline=None)
@given(scenarios())
def test_every_task_accounted_exactly_once(case):
    trace, nodes, cfg = case
    r, _ = _watched(trace, nodes, cfg)
    c = r.counts
    assert c["completed"] + c["running_at_horizon"] + c["queued_at_horizon"] + c["never_placeable"] \
        + c["not_yet_arrived"] == c["tasks"] == len(trace)
    for o, rec in zip(r.per_task, trace.records):
        if o.wait_s is not None:
            assert o.wait_s >= 0
        if o.completed:
            assert o.wait_s is not None
    if cfg.horizon is None:
        assert c["running_at_horizon"] == c["queued_at_horizon"] == c["not_yet_arrived"] == 0


@settings(max_examples=1000, deadline=None)
@given(scenarios())
def test_rerun_is_byte_identical(case):
    trace, nodes, cfg = case
    first = run_simulation(trace, nodes, cfg)
    assert pickle.dumps(first) == pickle.dumps(run_simulation(trace, nodes, cfg))
    assert first.to_json(with_timeline=True) == run_simulation(trace, nodes, cfg).to_json(with_timeline=True)
