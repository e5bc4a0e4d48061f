import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contsched.model import (
    Assignment,
    Container,
    InvalidInstance,
    Node,
    ProblemInstance,
    ResourceVector,
    is_feasible,
    node_load,
    node_loads,
    violation_amount,
)

from conftest import make_instance


def test_resource_vector_rejects_negative_and_nan():
    with pytest.raises(InvalidInstance):
        ResourceVector(-0.1, 0.2)
    with pytest.raises(InvalidInstance):
        ResourceVector(math.nan, 0.2)
    with pytest.raises(InvalidInstance):
        ResourceVector(0.1, math.inf)


def test_resource_vector_add_and_compare():
    a, b = ResourceVector(0.5, 0.3), ResourceVector(0.2, 0.2)
    assert (a + b).as_tuple() == pytest.approx((0.7, 0.5))
    assert b <= a
    assert not a <= b


def test_zero_demand_container_rejected():
    with pytest.raises(InvalidInstance):
        Container("c", ResourceVector(0, 0))
    Container("c", ResourceVector(0, 0.1))


def test_node_needs_positive_capacity():
    with pytest.raises(InvalidInstance):
        Node("n", ResourceVector(1, 0))


def test_instance_validation():
    with pytest.raises(InvalidInstance):
        ProblemInstance((), ())
    dup = (Container("a", ResourceVector(1, 1)), Container("a", ResourceVector(1, 1)))
    with pytest.raises(InvalidInstance):
        ProblemInstance(dup, (Node("n", ResourceVector(1, 1)),))


def test_assignment_must_be_total_and_in_range():
    inst = make_instance([(0.1, 0.1), (0.2, 0.2)], [(1, 1), (1, 1)])
    with pytest.raises(InvalidInstance):
        Assignment.for_instance(inst, [0])
    with pytest.raises(InvalidInstance):
        Assignment.for_instance(inst, [0, 2])
    a = Assignment.for_instance(inst, [1, 0])
    x = a.matrix(2)
    assert (x.sum(axis=1) == 1).all()
    assert x.tolist() == [[0, 1], [1, 0]]


def test_node_load_empty_node_is_zero():
    inst = make_instance([(0.5, 0.3)], [(1, 1), (1, 1)])
    assert node_load(inst, Assignment((0,)), 1) == ResourceVector(0, 0)


def test_node_load_sums_members():
    inst = make_instance([(0.5, 0.3), (0.2, 0.2), (0.9, 0.9)], [(1, 1), (1, 1)])
    load = node_load(inst, Assignment((0, 0, 1)), 0)
    assert load.cpu == pytest.approx(0.7, abs=1e-9)
    assert load.mem == pytest.approx(0.5, abs=1e-9)


def test_node_load_single_container():
    inst = make_instance([(0.4, 0.6)], [(1, 1)])
    assert node_load(inst, Assignment((0,)), 0) == ResourceVector(0.4, 0.6)


def test_node_load_out_of_range():
    inst = make_instance([(0.4, 0.6)], [(1, 1)])
    with pytest.raises(IndexError):
        node_load(inst, Assignment((0,)), 1)


def test_feasibility_examples():
    one = make_instance([(0.5, 0.5)], [(1, 1)])
    assert is_feasible(one, Assignment((0,)))
    two = make_instance([(0.6, 0.1), (0.6, 0.1)], [(1, 1)])
    assert not is_feasible(two, Assignment((0, 0)))
    exact = make_instance([(0.25, 0.5), (0.75, 0.5)], [(1, 1)])
    assert is_feasible(exact, Assignment((0, 0)))


def test_violation_amount_examples():
    feasible = make_instance([(0.5, 0.5)], [(1, 1)])
    assert violation_amount(feasible, Assignment((0,))) == 0
    over = make_instance([(1.2, 0.8)], [(1, 1)])
    assert violation_amount(over, Assignment((0,))) == pytest.approx(0.2, abs=1e-9)
    both = make_instance([(1.5, 1.5)], [(1, 1)])
    assert violation_amount(both, Assignment((0,))) == pytest.approx(1.0, abs=1e-9)


def test_violation_scales_by_capacity():
    inst = make_instance([(1.0, 0.1)], [(0.5, 1)])
    assert violation_amount(inst, Assignment((0,))) == pytest.approx(1.0, abs=1e-12)


def test_base_load_counts_toward_capacity():
    inst = make_instance([(0.5, 0.1)], [(1, 1)], base=[(0.6, 0.0)])
    assert not is_feasible(inst, Assignment((0,)))
    assert node_load(inst, Assignment((0,)), 0).cpu == pytest.approx(1.1)


demand = st.tuples(st.floats(0.01, 1.0), st.floats(0.01, 1.0))


@st.composite
def instance_and_assignment(draw):
    m = draw(st.integers(0, 12))
    k = draw(st.integers(1, 5))
    demands = draw(st.lists(demand, min_size=m, max_size=m))
    caps = draw(st.lists(st.tuples(st.floats(0.1, 2.0), st.floats(0.1, 2.0)), min_size=k, max_size=k))
    mapping = draw(st.lists(st.integers(0, k - 1), min_size=m, max_size=m))
    return make_instance(demands, caps), Assignment(tuple(mapping))


@settings(max_examples=1000, deadline=None)
@given(instance_and_assignment())
def test_feasible_iff_zero_violation(case):
    inst, a = case
    assert is_feasible(inst, a) == (violation_amount(inst, a) == 0)


@settings(max_examples=1000, deadline=None)
@given(instance_and_assignment())
def test_load_conservation(case):
    inst, a = case
    loads = [node_load(inst, a, j) for j in range(inst.num_nodes)]
    total = ResourceVector.total(loads)
    expected = ResourceVector.total(c.demand for c in inst.containers)
    assert total.cpu == pytest.approx(expected.cpu, abs=1e-9)
    assert total.mem == pytest.approx(expected.mem, abs=1e-9)


@settings(max_examples=1000, deadline=None)
@given(instance_and_assignment(), st.randoms(use_true_random=False))
def test_node_load_permutation_invariant(case, rnd):
    inst, a = case
    order = list(range(inst.num_containers))
    rnd.shuffle(order)
    shuffled = ProblemInstance(tuple(inst.containers[i] for i in order), inst.nodes)
    remapped = Assignment(tuple(a.mapping[i] for i in order))
    for j in range(inst.num_nodes):
        # fsum makes the per-node totals order-independent, so equality is exact
        assert node_load(inst, a, j) == node_load(shuffled, remapped, j)


@settings(max_examples=1000, deadline=None)
@given(instance_and_assignment())
def test_every_container_on_exactly_one_node(case):
    inst, a = case
    x = a.matrix(inst.num_nodes)
    assert (x.sum(axis=1) == 1).all()
    assert np.array_equal(x.argmax(axis=1), np.array(a.mapping, dtype=int).reshape(-1))
