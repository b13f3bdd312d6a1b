import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from taxloss.taxonomy import balanced_taxonomy, six_leaf_taxonomy

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SIX_LEAF_TEXT = """root
  a1
    X1
    X2
  a2
    X3
    X4
    X5
  a3
    X6
"""


@pytest.fixture
def six_leaf():
    return six_leaf_taxonomy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def taxonomies(draw, depth=None, max_fanout=3):
    """Uniform-depth trees with 1..max_fanout children per internal node."""
    L = draw(st.integers(1, 3)) if depth is None else depth
    fanouts = []
    width = 1
    for _ in range(L):
        f = draw(st.lists(st.integers(1, max_fanout), min_size=width, max_size=width))
        fanouts.append(f)
        width = sum(f)
    return balanced_taxonomy(fanouts)


def random_taxonomy(rng, depth=3, max_fanout=3):
    fanouts, width = [], 1
    for _ in range(depth):
        f = [int(v) for v in rng.integers(1, max_fanout + 1, size=width)]
        fanouts.append(f)
        width = sum(f)
    return balanced_taxonomy(fanouts)


def random_simplex(rng, n, size=None):
    return rng.dirichlet(np.ones(n), size=size)


# acceptance suite: one line per criterion, shown after the run
ACCEPTANCE: dict[int, str] = {}


def record_criterion(n: int, ok: bool, detail: str) -> str:
    line = f"AC{n:<2} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
