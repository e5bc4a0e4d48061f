"""Genetic algorithm over container-to-node assignments.

Individuals are integer vectors holding one node index per container, so
every operator keeps the "exactly one node per container" property without
repair.  Capacity overflow is handled through a fitness penalty.

All randomness flows through a single ``numpy.random.Generator`` seeded
from ``GaConfig.seed``; operators work on whole populations at once and
draw a fixed number of variates per call, which keeps runs bit-for-bit
reproducible.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .model import Assignment, ProblemInstance, is_feasible, validate, violation_amount
from .objective import (
    ObjectiveBreakdown,
    ObjectiveWeights,
    objective_value,
    scalarize,
    summarize,
    utilization_from_loads,
)


# expected genes resampled per child when mutation_rate is left unset
DEFAULT_MUTATION_GENES = 3.0


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    generations: int = 300
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # None -> DEFAULT_MUTATION_GENES / num_containers
    elite_count: int = 2
    tournament_size: int = 3
    penalty_weight: float = 10.0
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 1 or self.generations < 1:
            raise ValueError("population_size and generations must be positive")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if rate is not None and not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {rate!r}")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must satisfy 0 <= elite_count < population_size")
        if not 2 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must satisfy 2 <= tournament_size <= population_size")
        if not math.isfinite(self.penalty_weight) or self.penalty_weight < 0:
            raise ValueError("penalty_weight must be finite and >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def resolved_mutation_rate(self, num_containers: int) -> float:
        if self.mutation_rate is not None:
            return self.mutation_rate
        return min(1.0, DEFAULT_MUTATION_GENES / num_containers) if num_containers else 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GaOutcome:
    best: Assignment
    best_breakdown: ObjectiveBreakdown
    best_fitness: float
    best_feasible: bool
    history: tuple[tuple[float, float], ...]


def fitness(instance: ProblemInstance, a: Assignment, cfg: GaConfig) -> float:
    """Weighted objective minus ``penalty_weight`` times the capacity overflow."""
    o = objective_value(instance, a, cfg.weights).scalar
    if cfg.penalty_weight == 0:
        return o
    return o - cfg.penalty_weight * violation_amount(instance, a)


class PopulationEvaluator:
    """Vectorized penalized fitness for a whole ``(P, m)`` population."""

    def __init__(self, instance: ProblemInstance, cfg: GaConfig):
        self.k = instance.num_nodes
        self.demands = instance.demands
        self.capacities = instance.capacities
        self.base = instance.base_loads
        self.weights = cfg.weights
        self.penalty = cfg.penalty_weight

    def loads(self, genes: np.ndarray) -> np.ndarray:
        p, m = genes.shape
        flat = (genes + self.k * np.arange(p)[:, None]).ravel()
        out = np.empty((p, self.k, 2))
        for d in range(2):
            w = np.broadcast_to(self.demands[:, d], (p, m)).ravel()
            out[:, :, d] = np.bincount(flat, weights=w, minlength=p * self.k).reshape(p, self.k)
        return out + self.base

    def __call__(self, genes: np.ndarray) -> np.ndarray:
        loads = self.loads(genes)
        u, l = summarize(utilization_from_loads(loads, self.capacities))
        fit = scalarize(u, l, self.weights)
        if self.penalty:
            over = np.maximum(loads - self.capacities, 0.0) / self.capacities
            fit = fit - self.penalty * over.sum(axis=(1, 2))
        return fit


def _random_genes(rng: np.random.Generator, shape: tuple[int, ...], k: int) -> np.ndarray:
    return rng.integers(0, k, size=shape, dtype=np.int64)


def init_population(instance: ProblemInstance, cfg: GaConfig) -> list[Assignment]:
    """``population_size`` uniformly random assignments drawn from ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    genes = _random_genes(rng, (cfg.population_size, instance.num_containers), instance.num_nodes)
    return [Assignment(tuple(row)) for row in genes.tolist()]


def tournament(fitnesses: np.ndarray, size: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """Indices of ``count`` tournament winners; ties go to the lowest index."""
    n = len(fitnesses)
    entrants = rng.integers(0, n, size=(count, size))
    scores = fitnesses[entrants]
    top = scores.max(axis=1, keepdims=True)
    return np.where(scores == top, entrants, n).min(axis=1)


def select(
    pool: Sequence[Assignment],
    fitnesses: Sequence[float],
    cfg: GaConfig,
    rng: np.random.Generator,
) -> Assignment:
    if not pool:
        raise ValueError("cannot select from an empty pool")
    winner = tournament(np.asarray(fitnesses, dtype=float), cfg.tournament_size, rng, 1)[0]
    return pool[int(winner)]


def crossover_genes(p1: np.ndarray, p2: np.ndarray, rate: float, rng: np.random.Generator):
    """Uniform crossover on ``(..., m)`` parent arrays; returns two children."""
    mate = rng.random(p1.shape[:-1]) < rate
    coins = rng.random(p1.shape) < 0.5
    swap = mate[..., None] & coins
    return np.where(swap, p2, p1), np.where(swap, p1, p2)


def mutate_genes(genes: np.ndarray, rate: float, k: int, rng: np.random.Generator) -> np.ndarray:
    hit = rng.random(genes.shape) < rate
    fresh = _random_genes(rng, genes.shape, k)
    return np.where(hit, fresh, genes)


def crossover(
    p1: Assignment, p2: Assignment, cfg: GaConfig, rng: np.random.Generator
) -> tuple[Assignment, Assignment]:
    if len(p1) != len(p2):
        raise ValueError("parents must cover the same containers")
    c1, c2 = crossover_genes(np.array(p1.mapping), np.array(p2.mapping), cfg.crossover_rate, rng)
    return Assignment(tuple(c1.tolist())), Assignment(tuple(c2.tolist()))


def mutate(a: Assignment, cfg: GaConfig, rng: np.random.Generator, num_nodes: int) -> Assignment:
    rate = cfg.resolved_mutation_rate(len(a))
    return Assignment(tuple(mutate_genes(np.array(a.mapping), rate, num_nodes, rng).tolist()))


def evolve(instance: ProblemInstance, cfg: GaConfig, observer=None) -> GaOutcome:
    """Run the generational GA with elitism and return the fittest individual seen.

    ``observer``, when given, is called with each generation's gene matrix
    (generation 0 included); it must not modify it.
    """
    m, k = instance.num_containers, instance.num_nodes
    if m == 0:
        empty = Assignment(())
        breakdown = objective_value(instance, empty, cfg.weights)
        f = fitness(instance, empty, cfg)
        return GaOutcome(empty, breakdown, f, is_feasible(instance, empty),
                         tuple((f, f) for _ in range(cfg.generations + 1)))

    rng = np.random.default_rng(cfg.seed)
    evaluate = PopulationEvaluator(instance, cfg)
    mutation_rate = cfg.resolved_mutation_rate(m)
    size, elites = cfg.population_size, cfg.elite_count
    n_children = size - elites
    n_pairs = (n_children + 1) // 2

    pop = _random_genes(rng, (size, m), k)
    fit = evaluate(pop)
    history = [(float(fit.max()), float(fit.mean()))]
    best_i = int(np.argmax(fit))
    best_genes, best_fit = pop[best_i].copy(), fit[best_i]
    if observer:
        observer(pop)

    for _ in range(cfg.generations):
        order = np.argsort(-fit, kind="stable")
        parents = tournament(fit, cfg.tournament_size, rng, 2 * n_pairs)
        c1, c2 = crossover_genes(pop[parents[0::2]], pop[parents[1::2]], cfg.crossover_rate, rng)
        children = np.empty((2 * n_pairs, m), dtype=pop.dtype)
        children[0::2], children[1::2] = c1, c2
        children = mutate_genes(children[:n_children], mutation_rate, k, rng)
        pop = np.concatenate([pop[order[:elites]], children])
        fit = evaluate(pop)
        history.append((float(fit.max()), float(fit.mean())))
        gen_best = int(np.argmax(fit))
        if fit[gen_best] > best_fit:
            best_genes, best_fit = pop[gen_best].copy(), fit[gen_best]
        if observer:
            observer(pop)

    best = Assignment(tuple(best_genes.tolist()))
    validate(instance, best)
    return GaOutcome(
        best=best,
        best_breakdown=objective_value(instance, best, cfg.weights),
        best_fitness=fitness(instance, best, cfg),
        best_feasible=is_feasible(instance, best),
        history=tuple(history),
    )
