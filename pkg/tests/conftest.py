import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


def random_simplex(rng, n, v, concentration=None):
    """Dirichlet samples; low concentration gives peaked rows with exact zeros after rounding."""
    alpha = concentration if concentration is not None else rng.uniform(0.05, 2.0)
    return rng.dirichlet(np.full(v, alpha), size=n)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
