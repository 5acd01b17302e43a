import json
from pathlib import Path

import numpy as np
import pytest

from gtsvrg import kernels
from gtsvrg.objectives import make_quadratic
from gtsvrg.topology import MixingMatrix, build_graph, metropolis_weights

GOLDENS = Path(__file__).parent / "goldens"

BACKENDS = kernels.available_backends()


def load_golden(name):
    return json.loads((GOLDENS / name).read_text())


def lazy_pair(weight=0.05):
    return MixingMatrix.from_array([[1 - weight, weight], [weight, 1 - weight]])


@pytest.fixture
def ring4():
    return metropolis_weights(build_graph("ring", 4))


@pytest.fixture
def quad4():
    return make_quadratic(4, 5, 3, 1.0, 5.0, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
