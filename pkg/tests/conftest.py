import numpy as np
import pytest

from coriolis_kit import load_model
from coriolis_kit.model import bundled_models

BUNDLED = bundled_models()


@pytest.fixture(scope="session")
def models():
    return {name: load_model(name) for name in BUNDLED}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_states(model, count, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield model.random_config(rng), rng.normal(size=model.nv)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
