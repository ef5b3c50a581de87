import pathlib

import numpy as np
import pytest

from whalloc.types import PenaltyMatrix

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = pathlib.Path(__file__).resolve().parent / "fixtures"
DEMO = ROOT / "demo"

ACCEPTANCE_LINES = []


def random_instance(rng, max_m=5, max_k=3, max_n=4, max_cost=9, zero_diag=False):
    """Small random (I, L, C) instance with integer penalties."""
    M = int(rng.integers(1, max_m + 1))
    K = int(rng.integers(1, max_k + 1))
    q = rng.integers(1, max_n + 1, size=M)
    I = np.zeros((M, K), dtype=np.int64)
    for i in range(M):
        I[i] = rng.multinomial(q[i], rng.dirichlet(np.ones(K)))
    low = 1 if zero_diag else 0
    costs = rng.integers(low, max_cost + 1, size=(K, K)).astype(float)
    if zero_diag:
        # zero diagonal, strictly positive elsewhere
        np.fill_diagonal(costs, 0.0)
    L = PenaltyMatrix.from_costs(costs)
    C = rng.integers(0, int(q.sum()) + 1, size=K)
    return I, L, C


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
