import numpy as np
import pytest

from splinefit.fitting import make_problem


def smooth_surface(rows, cols):
    x, y = np.meshgrid(np.linspace(0, 1, rows), np.linspace(0, 1, cols), indexing="ij")
    z = np.sin(2 * x) * np.cos(3 * y) + 0.3 * x * y
    return np.stack([x, y, z], axis=-1)


def random_instance(rng, rows, cols, m, n, degree):
    """Random data and net on uniform params with averaging knots."""
    grid, ku, kv = make_problem((rows, cols), (m, n), degree, degree)
    data = rng.normal(size=(rows, cols, 3))
    net = rng.normal(size=(m, n, 3))
    return data, net, grid, ku, kv


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    _ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
