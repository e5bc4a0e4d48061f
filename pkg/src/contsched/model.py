"""Containers, nodes, assignments and the per-node capacity constraint."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

DIMENSIONS = ("cpu", "mem")


class InvalidInstance(ValueError):
    """Raised when containers, nodes or an assignment break a model invariant."""


@dataclass(frozen=True)
class ResourceVector:
    """CPU and memory quantity in normalized machine-fraction units."""

    cpu: float = 0.0
    mem: float = 0.0

    def __post_init__(self) -> None:
        for name in DIMENSIONS:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidInstance(f"{name} must be finite and >= 0, got {value!r}")
            object.__setattr__(self, name, float(value))

    def __add__(self, other: ResourceVector) -> ResourceVector:
        return ResourceVector(self.cpu + other.cpu, self.mem + other.mem)

    def __le__(self, other: ResourceVector) -> bool:
        return self.cpu <= other.cpu and self.mem <= other.mem

    def __ge__(self, other: ResourceVector) -> bool:
        return self.cpu >= other.cpu and self.mem >= other.mem

    def as_tuple(self) -> tuple[float, float]:
        return (self.cpu, self.mem)

    @classmethod
    def total(cls, vectors: Iterable[ResourceVector]) -> ResourceVector:
        """Component-wise sum, correctly rounded so the result ignores ordering."""
        vectors = list(vectors)
        return cls(math.fsum(v.cpu for v in vectors), math.fsum(v.mem for v in vectors))


ZERO = ResourceVector()


@dataclass(frozen=True)
class Container:
    id: str
    demand: ResourceVector

    def __post_init__(self) -> None:
        if self.demand.cpu <= 0 and self.demand.mem <= 0:
            raise InvalidInstance(f"container {self.id!r} has zero demand")


@dataclass(frozen=True)
class Node:
    id: str
    capacity: ResourceVector

    def __post_init__(self) -> None:
        if self.capacity.cpu <= 0 or self.capacity.mem <= 0:
            raise InvalidInstance(f"node {self.id!r} needs positive cpu and mem capacity")


@dataclass(frozen=True)
class ProblemInstance:
    """A placement problem: containers to place on nodes.

    ``base_load`` is load already present on each node (running work the
    placement must not move); it defaults to zero everywhere and counts
    toward both the capacity check and the objective.
    """

    containers: tuple[Container, ...]
    nodes: tuple[Node, ...]
    base_load: tuple[ResourceVector, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "containers", tuple(self.containers))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if not self.nodes:
            raise InvalidInstance("a problem instance needs at least one node")
        for label, items in (("container", self.containers), ("node", self.nodes)):
            ids = [item.id for item in items]
            if len(set(ids)) != len(ids):
                raise InvalidInstance(f"duplicate {label} ids")
        base = tuple(self.base_load) or tuple(ZERO for _ in self.nodes)
        if len(base) != len(self.nodes):
            raise InvalidInstance("base_load must have one entry per node")
        object.__setattr__(self, "base_load", base)

    @property
    def num_containers(self) -> int:
        return len(self.containers)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def demands(self) -> np.ndarray:
        """``(m, 2)`` read-only array of container demands."""
        arr = np.array([c.demand.as_tuple() for c in self.containers], dtype=float).reshape(-1, 2)
        arr.setflags(write=False)
        return arr

    @cached_property
    def capacities(self) -> np.ndarray:
        arr = np.array([n.capacity.as_tuple() for n in self.nodes], dtype=float).reshape(-1, 2)
        arr.setflags(write=False)
        return arr

    @cached_property
    def base_loads(self) -> np.ndarray:
        arr = np.array([b.as_tuple() for b in self.base_load], dtype=float).reshape(-1, 2)
        arr.setflags(write=False)
        return arr


@dataclass(frozen=True)
class Assignment:
    """Container index -> node index; the dense form of the allocation matrix X."""

    mapping: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "mapping", tuple(int(j) for j in self.mapping))
        if any(j < 0 for j in self.mapping):
            raise InvalidInstance("node indices must be non-negative")

    def __len__(self) -> int:
        return len(self.mapping)

    @classmethod
    def for_instance(cls, instance: ProblemInstance, mapping: Sequence[int]) -> Assignment:
        a = cls(tuple(mapping))
        validate(instance, a)
        return a

    def matrix(self, num_nodes: int) -> np.ndarray:
        """Binary ``(m, k)`` matrix with exactly one 1 per row."""
        x = np.zeros((len(self.mapping), num_nodes), dtype=np.int8)
        x[np.arange(len(self.mapping)), list(self.mapping)] = 1
        return x

    def members(self, j: int) -> list[int]:
        """Indices of containers placed on node ``j`` (the set C_j)."""
        return [i for i, node in enumerate(self.mapping) if node == j]


def validate(instance: ProblemInstance, a: Assignment) -> None:
    if len(a.mapping) != instance.num_containers:
        raise InvalidInstance(
            f"assignment covers {len(a.mapping)} containers, instance has {instance.num_containers}"
        )
    k = instance.num_nodes
    for i, j in enumerate(a.mapping):
        if not 0 <= j < k:
            raise InvalidInstance(f"container {i} mapped to node {j}, outside 0..{k - 1}")


def _check_node(instance: ProblemInstance, j: int) -> None:
    if not 0 <= j < instance.num_nodes:
        raise IndexError(f"node index {j} out of range for {instance.num_nodes} nodes")


def node_load(instance: ProblemInstance, a: Assignment, j: int) -> ResourceVector:
    """Summed demand of every container on node ``j``, plus any base load."""
    _check_node(instance, j)
    validate(instance, a)
    parts = [instance.base_load[j]]
    parts.extend(instance.containers[i].demand for i in a.members(j))
    return ResourceVector.total(parts)


def node_loads(instance: ProblemInstance, a: Assignment) -> list[ResourceVector]:
    validate(instance, a)
    buckets: list[list[ResourceVector]] = [[b] for b in instance.base_load]
    for c, j in zip(instance.containers, a.mapping):
        buckets[j].append(c.demand)
    return [ResourceVector.total(b) for b in buckets]


def is_feasible(instance: ProblemInstance, a: Assignment) -> bool:
    """True iff no node exceeds its capacity in any dimension (load == capacity is fine)."""
    return all(load <= node.capacity for load, node in zip(node_loads(instance, a), instance.nodes))


def violation_amount(instance: ProblemInstance, a: Assignment) -> float:
    """Total capacity overflow, each term relative to the node's capacity."""
    terms = []
    for load, node in zip(node_loads(instance, a), instance.nodes):
        for d in DIMENSIONS:
            cap = getattr(node.capacity, d)
            terms.append(max(0.0, getattr(load, d) - cap) / cap)
    return math.fsum(terms)
