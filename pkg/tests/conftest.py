import numpy as np
import pytest
from hypothesis import strategies as st

from dyqn.core import Dataset, DecisionBag, EvidenceAssignment, Vignette
from dyqn.synthetic import GeneratorConfig, generate

bags = st.tuples(*[st.integers(0, 6)] * 4).filter(lambda c: sum(c) > 0).map(DecisionBag)
unit = st.floats(0.0, 1.0, allow_nan=False)


def make_vignette(vid, items, counts):
    ev = tuple(EvidenceAssignment(i, p) for i, p in items)
    return Vignette(vid, ev, DecisionBag(counts))


@pytest.fixture
def toy_dataset():
    names = [f"e{i}" for i in range(6)]
    return Dataset(names, [
        make_vignette("a", [(0, True), (1, False), (2, True)], (0, 2, 1, 0)),
        make_vignette("b", [(3, True)], (1, 0, 0, 0)),
        make_vignette("c", [(1, True), (4, False), (5, True), (0, False)], (0, 0, 3, 1)),
        make_vignette("d", [(2, False), (3, False)], (1, 1, 1, 1)),
    ])


@pytest.fixture(scope="session")
def small_synthetic():
    return generate(GeneratorConfig(n_vignettes=80, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
