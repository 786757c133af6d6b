import numpy as np
import pytest

from anisoflow.spectral import Grid, VectorField, single_mode

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    ok = call.excinfo is None
    prev = _criteria.get(number, (True, title))
    _criteria[number] = (prev[0] and ok, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        ok, title = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20240601))


@pytest.fixture(scope="session")
def grid16():
    return Grid(16)


def reference_forcing(grid, scale=1.0):
    """(1, 0.5, 0) sin(2 pi (x1 + x3)), a single smooth mean-zero mode."""
    s = single_mode(grid, (1, 0, 1), scale, "sin").nodal
    return VectorField(grid, nodal=np.stack([s, 0.5 * s, 0 * s]))
