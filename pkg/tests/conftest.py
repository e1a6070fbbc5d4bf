import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, print_blob=True)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_population():
    from limdep.synth import SyntheticSpec, generate

    return generate(SyntheticSpec(n=20_000, seed=5))


@pytest.fixture
def tiny_dataset():
    from limdep.data import TabularDataset

    rng = np.random.default_rng(0)
    x = rng.standard_normal((60, 3))
    y = np.where(x[:, 0] > 0.2, np.exp(x[:, 1]) + 0.5, 0.0)
    return TabularDataset(x, y, name="tiny")
