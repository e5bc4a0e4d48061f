"""One-pass comparison schedulers: first-fit and balance-seeking best-fit-decreasing.

Both may leave containers unplaced when nothing fits; the simulator queues
those.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .model import Assignment, ProblemInstance, ResourceVector


@dataclass(frozen=True)
class Placement:
    """Possibly partial assignment; ``None`` marks an unplaced container."""

    mapping: tuple[int | None, ...]

    @property
    def unplaced(self) -> list[int]:
        return [i for i, j in enumerate(self.mapping) if j is None]

    @property
    def complete(self) -> bool:
        return all(j is not None for j in self.mapping)

    def to_assignment(self) -> Assignment:
        if not self.complete:
            raise ValueError(f"{len(self.unplaced)} containers are unplaced")
        return Assignment(tuple(self.mapping))

    def placed_subinstance(self, instance: ProblemInstance) -> tuple[ProblemInstance, Assignment]:
        """The instance restricted to placed containers, with their assignment."""
        keep = [i for i, j in enumerate(self.mapping) if j is not None]
        sub = ProblemInstance(
            tuple(instance.containers[i] for i in keep), instance.nodes, instance.base_load
        )
        return sub, Assignment(tuple(self.mapping[i] for i in keep))


class Packer:
    """Tracks the demand stacked on each node so fit checks agree with ``is_feasible``."""

    def __init__(self, instance: ProblemInstance):
        self.instance = instance
        self.parts = [([b.cpu], [b.mem]) for b in instance.base_load]

    def load_with(self, j: int, d: ResourceVector) -> tuple[float, float]:
        cpu, mem = self.parts[j]
        return math.fsum(cpu + [d.cpu]), math.fsum(mem + [d.mem])

    def fits(self, j: int, d: ResourceVector) -> bool:
        cap = self.instance.nodes[j].capacity
        cpu, mem = self.load_with(j, d)
        return cpu <= cap.cpu and mem <= cap.mem

    def utilization_with(self, j: int, d: ResourceVector) -> float:
        cap = self.instance.nodes[j].capacity
        cpu, mem = self.load_with(j, d)
        return 0.5 * (cpu / cap.cpu + mem / cap.mem)

    def place(self, j: int, d: ResourceVector) -> None:
        self.parts[j][0].append(d.cpu)
        self.parts[j][1].append(d.mem)


def static_rule_schedule(instance: ProblemInstance) -> Placement:
    """First fit: containers in input order, each onto the first node with room."""
    packer = Packer(instance)
    mapping: list[int | None] = []
    for c in instance.containers:
        target = next((j for j in range(instance.num_nodes) if packer.fits(j, c.demand)), None)
        if target is not None:
            packer.place(target, c.demand)
        mapping.append(target)
    return Placement(tuple(mapping))


def dominant_demand_order(instance: ProblemInstance) -> list[int]:
    """Container indices by decreasing max(cpu, mem), ties by container id."""
    return sorted(
        range(instance.num_containers),
        key=lambda i: (-max(instance.containers[i].demand.as_tuple()), instance.containers[i].id),
    )


def least_utilized_fit(packer: Packer, d: ResourceVector) -> int | None:
    """Feasible node with the lowest utilization after adding ``d``; ties to the lowest index."""
    best, best_u = None, math.inf
    for j in range(packer.instance.num_nodes):
        if packer.fits(j, d):
            u = packer.utilization_with(j, d)
            if u < best_u:
                best, best_u = j, u
    return best


def heuristic_schedule(instance: ProblemInstance, presorted: bool = False) -> Placement:
    """Best-fit-decreasing that sends each container to the node left least utilized.

    With ``presorted`` the containers are taken in input order, which the
    simulator uses to keep its wait queue first-in first-out.
    """
    packer = Packer(instance)
    mapping: list[int | None] = [None] * instance.num_containers
    order = range(instance.num_containers) if presorted else dominant_demand_order(instance)
    for i in order:
        d = instance.containers[i].demand
        best = least_utilized_fit(packer, d)
        if best is not None:
            packer.place(best, d)
            mapping[i] = best
    return Placement(tuple(mapping))
