import sys

import numpy as np
import pytest

from rulegrad.data import SyntheticSpec, generate_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic(SyntheticSpec(n_hypernyms=3, classes_per_hypernym=3,
                                            samples_per_class=12, d_x=6, d_y=5,
                                            n_attributes=4, seed=7))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
