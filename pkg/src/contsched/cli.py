"""``contsched`` command line: solve, simulate, compare, gen-trace, rerun.

Exit codes: 0 success, 1 input error, 2 the solver's best answer is
infeasible.  Every run writes ``manifest.json`` next to its outputs; feeding
that file to ``contsched rerun`` repeats the run and reproduces the outputs
byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .ga import GaConfig, evolve, fitness
from .model import Container, InvalidInstance, Node, ProblemInstance, ResourceVector, violation_amount
from .objective import ObjectiveWeights
from .report import dumps, fmt, table1_csv, table2_csv, timeline_csv
from .simulator import (
    SIM_GA_DEFAULT,
    STRATEGIES,
    SimConfig,
    compare_snapshot,
    compare_strategies,
)
from .trace import SyntheticTraceConfig, Trace, TraceParseError, format_trace, generate_synthetic_trace, parse_trace

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2

# ten heterogeneous nodes, (cpu, mem) in normalized units
DEFAULT_NODE_POOL = (
    ("n00", 1.0, 1.0),
    ("n01", 1.0, 0.5),
    ("n02", 0.5, 0.5),
    ("n03", 0.5, 1.0),
    ("n04", 0.75, 0.75),
    ("n05", 1.0, 1.0),
    ("n06", 0.5, 0.25),
    ("n07", 0.25, 0.5),
    ("n08", 0.75, 0.5),
    ("n09", 0.5, 0.75),
)

SYNTHETIC_FLAGS = {
    "num_tasks": ("--num-tasks", int),
    "base_arrival_rate": ("--arrival-rate", float),
    "burst_start": ("--burst-start", float),
    "burst_end": ("--burst-end", float),
    "burst_rate_multiplier": ("--burst-multiplier", float),
    "cpu_median": ("--cpu-median", float),
    "cpu_sigma": ("--cpu-sigma", float),
    "mem_median": ("--mem-median", float),
    "mem_sigma": ("--mem-sigma", float),
    "duration_median": ("--duration-median", float),
    "duration_sigma": ("--duration-sigma", float),
    "num_priorities": ("--num-priorities", int),
}


class InputError(Exception):
    pass


class _HelpFormatter(argparse.HelpFormatter):
    """Appends every option's default unless the help text already states it."""

    def _get_help_string(self, action):
        text = action.help or ""
        if "(default" in text or not action.option_strings or action.default is argparse.SUPPRESS:
            return text
        return f"{text} (default: %(default)s)".lstrip()


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with "infeasible"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# -- input files -----------------------------------------------------------

def default_nodes() -> tuple[Node, ...]:
    return tuple(Node(i, ResourceVector(c, m)) for i, c, m in DEFAULT_NODE_POOL)


def _rows(text: str, header: tuple[str, ...], what: str) -> list[list[str]]:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(cell.strip() for cell in r)]
    if not rows or tuple(c.strip() for c in rows[0]) != header:
        raise InputError(f"{what}: expected header {','.join(header)}")
    out = []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputError(f"{what}: row {n} has {len(row)} fields, expected {len(header)}")
        out.append([c.strip() for c in row])
    return out


def _vector(cpu: str, mem: str, where: str) -> ResourceVector:
    try:
        return ResourceVector(float(cpu), float(mem))
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from None


def read_nodes(path: str) -> tuple[Node, ...]:
    """Node pool CSV with header ``node_id,cpu,mem``."""
    text = Path(path).read_text(encoding="utf-8")
    return tuple(Node(r[0], _vector(r[1], r[2], f"node {r[0]}")) for r in _rows(text, ("node_id", "cpu", "mem"), path))


def read_instance(path: str) -> ProblemInstance:
    """Two-section CSV: a ``[nodes]`` block then a ``[containers]`` block.

    ::

        [nodes]
        node_id,cpu,mem
        n1,1,1
        [containers]
        container_id,cpu,mem
        c1,0.5,0.25
    """
    sections: dict[str, list[str]] = {}
    current = None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip().lower()
            if current in sections:
                raise InputError(f"{path}: section [{current}] appears twice")
            sections[current] = []
        elif stripped and current is None:
            raise InputError(f"{path}: data before the first section header")
        elif current is not None:
            sections[current].append(line)
    if set(sections) != {"nodes", "containers"}:
        raise InputError(f"{path}: need exactly the sections [nodes] and [containers]")
    nodes = tuple(
        Node(r[0], _vector(r[1], r[2], f"node {r[0]}"))
        for r in _rows("\n".join(sections["nodes"]), ("node_id", "cpu", "mem"), f"{path} [nodes]")
    )
    containers = tuple(
        Container(r[0], _vector(r[1], r[2], f"container {r[0]}"))
        for r in _rows("\n".join(sections["containers"]), ("container_id", "cpu", "mem"), f"{path} [containers]")
    )
    return ProblemInstance(containers, nodes)


def sha256_of(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- argument helpers ------------------------------------------------------

def _weights(args) -> ObjectiveWeights:
    return ObjectiveWeights(args.alpha, args.beta)


def _ga_config(args) -> GaConfig:
    return GaConfig(
        population_size=args.pop_size,
        generations=args.generations,
        crossover_rate=args.crossover_rate,
        mutation_rate=args.mutation_rate,
        elite_count=args.elite,
        tournament_size=args.tournament_size,
        penalty_weight=args.penalty,
        weights=_weights(args),
        seed=args.seed,
    )


def _synthetic_config(args) -> SyntheticTraceConfig:
    values = SyntheticTraceConfig.from_file(args.config).to_dict() if args.config else {}
    for name in SYNTHETIC_FLAGS:
        given = getattr(args, name)
        if given is not None:
            values[name] = given
    values["seed"] = args.trace_seed if args.trace_seed is not None else args.seed
    return SyntheticTraceConfig.from_mapping(values)


def _load_trace(args) -> tuple[Trace, SyntheticTraceConfig | None]:
    synthetic_given = [SYNTHETIC_FLAGS[n][0] for n in SYNTHETIC_FLAGS if getattr(args, n) is not None]
    if args.config:
        synthetic_given.append("--config")
    if args.trace_seed is not None:
        synthetic_given.append("--trace-seed")
    if args.trace:
        if synthetic_given:
            raise InputError(f"--trace cannot be combined with synthetic trace flags ({', '.join(synthetic_given)})")
        return parse_trace(args.trace), None
    cfg = _synthetic_config(args)
    return generate_synthetic_trace(cfg), cfg


def _nodes(args) -> tuple[Node, ...]:
    return read_nodes(args.nodes_file) if args.nodes_file else default_nodes()


def _burst_deadline(raw: str) -> float | None:
    if raw.strip().lower() == "none":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected seconds or 'none', got {raw!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("deadline must be > 0")
    return value


def _strategies(raw: str) -> list[str]:
    names = [s.strip() for s in raw.split(",") if s.strip()]
    bad = [s for s in names if s not in STRATEGIES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"strategies must be drawn from {','.join(STRATEGIES)}")
    if len(set(names)) != len(names):
        raise argparse.ArgumentTypeError("duplicate strategy")
    return names


def _sim_configs(args, strategies) -> list[SimConfig]:
    ga = _ga_config(args)
    return [
        SimConfig(
            strategy=s,
            ga_config=ga,
            weights=ga.weights,
            burst_deadline=args.burst_deadline,
            sample_interval=args.sample_interval,
        )
        for s in strategies
    ]


# -- outputs ---------------------------------------------------------------

def _manifest(args, resolved: dict, seeds: dict, inputs: dict) -> dict:
    recorded = {k: v for k, v in vars(args).items() if k not in ("func", "out_dir", "manifest")}
    return {
        "artifact_version": __version__,
        "command": args.command,
        "arguments": recorded,
        "resolved": resolved,
        "seeds": seeds,
        "inputs": {role: {"path": p, "sha256": sha256_of(p)} for role, p in inputs.items()},
    }


def _write(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text, encoding="utf-8")


def _input_paths(args, *roles: str) -> dict:
    found = {}
    for role in roles:
        value = getattr(args, role, None)
        if value:
            found[role] = str(Path(value).resolve())
    return found


# -- commands --------------------------------------------------------------

def cmd_solve(args) -> int:
    instance = read_instance(args.instance)
    cfg = _ga_config(args)
    outcome = evolve(instance, cfg)
    best = outcome.best
    rows = io.StringIO()
    writer = csv.writer(rows, lineterminator="\n")
    writer.writerow(["container_id", "node_id"])
    for c, j in zip(instance.containers, best.mapping):
        writer.writerow([c.id, instance.nodes[j].id])
    breakdown = outcome.best_breakdown.to_dict()
    breakdown.update(
        feasible=outcome.best_feasible,
        fitness=fitness(instance, best, cfg),
        violation=violation_amount(instance, best),
    )
    files = {
        "assignment.csv": rows.getvalue(),
        "breakdown.json": dumps(breakdown),
        "manifest.json": dumps(
            _manifest(args, {"ga": cfg.to_dict()}, {"ga": cfg.seed}, _input_paths(args, "instance"))
        ),
    }
    _write(Path(args.out_dir), files)
    if args.format == "json":
        sys.stdout.write(files["breakdown.json"])
    else:
        sys.stdout.write("mean_utilization,imbalance,scalar,feasible\n")
        sys.stdout.write(
            f"{fmt(outcome.best_breakdown.mean_utilization)},{fmt(outcome.best_breakdown.imbalance)},"
            f"{fmt(outcome.best_breakdown.scalar)},{int(outcome.best_feasible)}\n"
        )
    if not outcome.best_feasible:
        print("best assignment found is infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _run_replay(args, strategies: list[str]) -> int:
    trace, synth = _load_trace(args)
    nodes = _nodes(args)
    configs = _sim_configs(args, strategies)
    seeds = {"ga": configs[0].ga_config.seed}
    resolved = {
        "ga": configs[0].ga_config.to_dict(),
        "sim": {k: v for k, v in asdict(configs[0]).items() if k not in ("strategy", "ga_config")},
        "strategies": strategies,
        "nodes": [[n.id, n.capacity.cpu, n.capacity.mem] for n in nodes],
        "static_snapshot": bool(getattr(args, "static_snapshot", False)),
    }
    if synth is not None:
        resolved["trace"] = synth.to_dict()
        seeds["trace"] = synth.seed
    files = {}
    if resolved["static_snapshot"]:
        results = compare_snapshot(trace, nodes, configs)
        files["table1.csv"] = table1_csv(results)
        payload = {"mode": "snapshot", "results": [r.to_dict() for _, r in results]}
    else:
        results = compare_strategies(trace, nodes, configs)
        files["table1.csv"] = table1_csv(results)
        files["table2.csv"] = table2_csv(results)
        payload = {"mode": "replay", "results": [r.to_dict(with_tasks=args.per_task) for _, r in results]}
        if args.timeline:
            for name, r in results:
                files[f"timeline_{name}.csv"] = timeline_csv(r)
    files["results.json"] = dumps(payload)
    files["manifest.json"] = dumps(
        _manifest(args, resolved, seeds, _input_paths(args, "trace", "nodes_file", "config"))
    )
    _write(Path(args.out_dir), files)
    if args.format == "json":
        sys.stdout.write(files["results.json"])
    else:
        sys.stdout.write(files["table1.csv"])
        if "table2.csv" in files:
            sys.stdout.write(files["table2.csv"])
    return EXIT_OK


def cmd_simulate(args) -> int:
    return _run_replay(args, [args.strategy])


def cmd_compare(args) -> int:
    return _run_replay(args, args.strategies)


def cmd_gen_trace(args) -> int:
    cfg = _synthetic_config(args)
    trace = generate_synthetic_trace(cfg)
    text = format_trace(trace)
    out_dir = Path(args.out_dir)
    files = {args.output: text}
    files["manifest.json"] = dumps(
        _manifest(args, {"trace": cfg.to_dict()}, {"trace": cfg.seed}, _input_paths(args, "config"))
    )
    _write(out_dir, files)
    if args.format == "json":
        sys.stdout.write(dumps({"path": str(out_dir / args.output), "tasks": len(trace), "burst": trace.num_burst}))
    return EXIT_OK


def cmd_rerun(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    try:
        command, recorded = manifest["command"], manifest["arguments"]
    except (KeyError, TypeError):
        raise InputError(f"{args.manifest}: not a run manifest") from None
    if command not in COMMANDS:
        raise InputError(f"{args.manifest}: unknown command {command!r}")
    if manifest.get("artifact_version") != __version__:
        print(
            f"warning: manifest written by version {manifest.get('artifact_version')}, running {__version__}",
            file=sys.stderr,
        )
    for role, entry in manifest.get("inputs", {}).items():
        if not Path(entry["path"]).exists():
            raise InputError(f"input {role} missing: {entry['path']}")
        if sha256_of(entry["path"]) != entry["sha256"]:
            raise InputError(f"input {role} changed since the manifest was written: {entry['path']}")
    replay = argparse.Namespace(**recorded)
    replay.out_dir = args.out_dir
    replay.format = args.format if args.format is not None else recorded.get("format", "csv")
    return COMMANDS[command](replay)


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "gen-trace": cmd_gen_trace,
}


# -- parser ----------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=1.0, help="weight on mean utilization")
    p.add_argument("--beta", type=float, default=1.0, help="weight on load imbalance")
    p.add_argument("--seed", type=int, default=0, help="master seed for the GA (and synthetic traces)")
    p.add_argument("--out-dir", default=".", help="directory for output files")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="what to print on stdout")


def _ga_flags(p: argparse.ArgumentParser, defaults: GaConfig) -> None:
    g = p.add_argument_group("genetic algorithm")
    g.add_argument("--pop-size", type=int, default=defaults.population_size, help="population size")
    g.add_argument("--generations", type=int, default=defaults.generations, help="number of generations")
    g.add_argument("--crossover-rate", type=float, default=defaults.crossover_rate, help="probability a pair mates")
    g.add_argument(
        "--mutation-rate", type=float, default=defaults.mutation_rate,
        help="per-gene resample probability; None means 3 / number of containers",
    )
    g.add_argument("--elite", type=int, default=defaults.elite_count, help="individuals carried over unchanged")
    g.add_argument("--tournament-size", type=int, default=defaults.tournament_size, help="entrants per tournament")
    g.add_argument("--penalty", type=float, default=defaults.penalty_weight, help="capacity overflow penalty weight")


def _synthetic_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic trace (defaults shown are used when the flag is absent)")
    base = SyntheticTraceConfig()
    for name, (flag, kind) in SYNTHETIC_FLAGS.items():
        g.add_argument(flag, dest=name, type=kind, default=None, help=f"{name.replace('_', ' ')} (default: {getattr(base, name)})")
    g.add_argument("--trace-seed", type=int, default=None, help="seed for the synthetic trace (default: --seed)")
    g.add_argument("--config", default=None, help="key = value file of synthetic trace settings; flags override it")


def _sim_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("simulation")
    g.add_argument("--trace", default=None, help="trace CSV (default: generate a synthetic trace)")
    g.add_argument("--nodes-file", default=None, help="node pool CSV with header node_id,cpu,mem (default: built-in 10-node pool)")
    g.add_argument(
        "--burst-deadline", type=_burst_deadline, default=None,
        help="seconds from submission within which a burst task must finish, or 'none' (default: none)",
    )
    g.add_argument("--sample-interval", type=float, default=1.0, help="seconds between utilization samples")
    g.add_argument("--timeline", action="store_true", help="also write per-strategy timeline CSVs")
    g.add_argument("--per-task", action="store_true", help="include per-task outcomes in results.json")


def build_parser() -> argparse.ArgumentParser:
    fmt_cls = _HelpFormatter
    parser = _Parser(prog="contsched", description=__doc__.splitlines()[0], formatter_class=fmt_cls)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="place one instance with the GA", formatter_class=fmt_cls)
    p.add_argument("instance", help="two-section instance CSV ([nodes], [containers])")
    _common(p)
    _ga_flags(p, GaConfig())
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="replay a trace under one strategy", formatter_class=fmt_cls)
    _common(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="ga", help="placement strategy")
    _sim_flags(p)
    _synthetic_flags(p)
    _ga_flags(p, SIM_GA_DEFAULT)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="replay a trace under several strategies", formatter_class=fmt_cls)
    _common(p)
    p.add_argument("--strategies", type=_strategies, default=list(STRATEGIES), help="comma-separated")
    p.add_argument(
        "--static-snapshot", action="store_true",
        help="place all tasks at once on empty nodes and score once, instead of replaying",
    )
    _sim_flags(p)
    _synthetic_flags(p)
    _ga_flags(p, SIM_GA_DEFAULT)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-trace", help="write a synthetic trace CSV", formatter_class=fmt_cls)
    _common(p)
    p.add_argument("--output", default="trace.csv", help="file name inside --out-dir")
    _synthetic_flags(p)
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("rerun", help="repeat a run from its manifest.json", formatter_class=fmt_cls)
    p.add_argument("manifest", help="manifest.json written by an earlier run")
    p.add_argument("--out-dir", default=".", help="directory for output files")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="stdout format (default: as recorded)")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, InvalidInstance, TraceParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
