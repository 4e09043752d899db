import numpy as np
import pytest
from hypothesis import settings

from greedy_tn.network import random_network

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def random_ranks(rng, p, max_rank):
    ranks = np.ones((p, p), dtype=np.int64)
    for i in range(p):
        for j in range(i + 1, p):
            ranks[i, j] = ranks[j, i] = rng.integers(1, max_rank + 1)
    return ranks


def random_state(rng, p=None, max_dim=3, max_rank=3, min_p=1, max_p=4):
    """Random network with random dims and ranks, drawn from ``rng``."""
    if p is None:
        p = int(rng.integers(min_p, max_p + 1))
    dims = rng.integers(1, max_dim + 1, size=p)
    return random_network(dims, random_ranks(rng, p, max_rank), rng)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
