import numpy as np
import pytest

from nokit.discretization import Domain, uniform_grid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def torus1d(n):
    return uniform_grid(Domain("torus1d"), n)


def torus2d(n):
    return uniform_grid(Domain("torus2d"), n)


def sine(x):
    return np.sin(2 * np.pi * x[:, :1])


def band_limited(x):
    """Smooth periodic test function with modes 1 and 2 on the first axis."""
    return np.sin(2 * np.pi * x[:, :1]) + 0.5 * np.cos(4 * np.pi * x[:, :1])


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
