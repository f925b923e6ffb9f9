import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from moyalcalc.core_algebra import QElement, Symbol, SymbolGrid, ThetaMatrix, translate
from moyalcalc.errors import SupportWarning

settings.register_profile(
    "default", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def std():
    return ThetaMatrix.standard(1.0)


@pytest.fixture
def small_grid():
    return SymbolGrid(2, 41, 10.0)


def gaussian(theta, grid, **params):
    return QElement(theta, Symbol.from_family("gaussian", grid, **params))


def random_symbol(rng, grid, radius=None):
    """Complex noise, optionally confined to |t| <= radius."""
    s = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    if radius is not None:
        mask = sum(c * c for c in grid.coords()) <= radius**2
        s = s * mask
    return Symbol(grid, s)


@pytest.fixture
def quiet_support():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SupportWarning)
        yield


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(np.asarray(b)), 1e-300)


def fine_grid(R=12.0, h=0.2):
    return SymbolGrid.from_spacing(2, int(2 * R / h) | 1, h)


def five_symbols(theta=None):
    """Smooth test family whose K=64 oscillator matrices carry negligible tail mass."""
    theta = theta or ThetaMatrix.standard()
    g = fine_grid()
    out = [
        Symbol.from_family("gaussian", g),
        Symbol.from_family("hermite-gaussian", g, orders=[1, 0]),
        Symbol.from_family("hermite-gaussian", g, orders=[2, 1], sigma=1.2, amplitude=0.3),
        Symbol.from_family("gaussian", g, sigma=[1.4, 0.8], amplitude=0.5 - 0.3j),
        translate(QElement(theta, Symbol.from_family("gaussian", g, sigma=1.2)), [0.7, -0.4]).symbol,
    ]
    return [QElement(theta, s) for s in out]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
