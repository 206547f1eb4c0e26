import sys

import numpy as np
import pytest

from dpagd.data import make_synthetic
from dpagd.objectives import LabeledDataset


@pytest.fixture
def small_data():
    return make_synthetic(n=300, p=4, seed=11)


@pytest.fixture
def random_data():
    gen = np.random.default_rng(5)
    X = gen.normal(size=(40, 3))
    y = np.where(gen.random(40) < 0.5, -1.0, 1.0)
    return LabeledDataset(X, y)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "REPORT_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
