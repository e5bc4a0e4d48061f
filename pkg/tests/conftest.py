import sys
from pathlib import Path

import numpy as np
import pytest

from contsched.model import Container, Node, ProblemInstance, ResourceVector

sys.path.insert(0, str(Path(__file__).parent))


def make_instance(demands, capacities, base=None, **kw):
    containers = [Container(f"c{i}", ResourceVector(*d)) for i, d in enumerate(demands)]
    nodes = [Node(f"n{j}", ResourceVector(*c)) for j, c in enumerate(capacities)]
    base_load = tuple(ResourceVector(*b) for b in base) if base else ()
    return ProblemInstance(tuple(containers), tuple(nodes), base_load, **kw)


def random_instance(rng: np.random.Generator, m: int, k: int, tight: float = 1.0):
    """Heterogeneous nodes and demands scaled so total demand is ``tight`` x total capacity."""
    caps = rng.uniform(0.4, 1.0, size=(k, 2)).round(3)
    raw = rng.uniform(0.05, 1.0, size=(m, 2))
    dem = (raw / raw.sum(axis=0) * caps.sum(axis=0) * tight).round(4)
    dem = np.maximum(dem, 1e-3)
    return make_instance(dem.tolist(), caps.tolist())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# lines reported by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
