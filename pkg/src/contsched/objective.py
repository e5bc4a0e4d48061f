"""Utilization, load imbalance and their weighted-sum scalarization.

Per-node utilization is the mean of the CPU and memory load ratios, so it
lies in [0, 1] for any feasible placement.  Mean utilization averages over
every node (empty ones included) and imbalance is the population standard
deviation of the per-node values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Assignment, ProblemInstance, node_loads, validate


@dataclass(frozen=True)
class ObjectiveWeights:
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self) -> None:
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        if self.alpha == 0 and self.beta == 0:
            raise ValueError("alpha and beta cannot both be zero")

    def scaled(self, factor: float) -> ObjectiveWeights:
        return ObjectiveWeights(self.alpha * factor, self.beta * factor)


@dataclass(frozen=True)
class ObjectiveBreakdown:
    mean_utilization: float
    imbalance: float
    scalar: float
    per_node_utilization: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "mean_utilization": self.mean_utilization,
            "imbalance": self.imbalance,
            "scalar": self.scalar,
            "per_node_utilization": list(self.per_node_utilization),
        }


def utilization_from_loads(loads: np.ndarray, capacities: np.ndarray) -> np.ndarray:
    """Per-node utilization for loads of shape ``(..., k, 2)``; no clamping."""
    ratios = loads / capacities
    return 0.5 * (ratios[..., 0] + ratios[..., 1])


def summarize(per_node: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(mean utilization, imbalance) along the last axis of ``per_node``."""
    spread = per_node.std(axis=-1)
    # the mean of identical values can round off them, leaving a ~1e-17 residue
    flat = per_node.max(axis=-1) == per_node.min(axis=-1)
    return per_node.mean(axis=-1), np.where(flat, 0.0, spread)


def scalarize(u, l, weights: ObjectiveWeights):
    return weights.alpha * u - weights.beta * l


def _loads_array(instance: ProblemInstance, a: Assignment) -> np.ndarray:
    return np.array([v.as_tuple() for v in node_loads(instance, a)], dtype=float)


def per_node_utilization(instance: ProblemInstance, a: Assignment) -> np.ndarray:
    return utilization_from_loads(_loads_array(instance, a), instance.capacities)


def node_utilization(instance: ProblemInstance, a: Assignment, j: int) -> float:
    if not 0 <= j < instance.num_nodes:
        raise IndexError(f"node index {j} out of range for {instance.num_nodes} nodes")
    return float(per_node_utilization(instance, a)[j])


def mean_utilization(instance: ProblemInstance, a: Assignment) -> float:
    return float(per_node_utilization(instance, a).mean())


def load_imbalance(instance: ProblemInstance, a: Assignment) -> float:
    return float(summarize(per_node_utilization(instance, a))[1])


def breakdown_from_utilization(per_node: np.ndarray, weights: ObjectiveWeights) -> ObjectiveBreakdown:
    u, l = summarize(per_node)
    u, l = float(u), float(l)
    return ObjectiveBreakdown(
        mean_utilization=u,
        imbalance=l,
        scalar=float(scalarize(u, l, weights)),
        per_node_utilization=tuple(float(x) for x in per_node),
    )


def objective_value(
    instance: ProblemInstance, a: Assignment, weights: ObjectiveWeights | None = None
) -> ObjectiveBreakdown:
    """Utilization, imbalance and ``alpha*U - beta*L`` for one assignment (higher is better)."""
    validate(instance, a)
    return breakdown_from_utilization(per_node_utilization(instance, a), weights or ObjectiveWeights())
