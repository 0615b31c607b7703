import math

import numpy as np
import pytest
from scipy import integrate

from frnet.core import DesignData
from frnet.simgen import ScenarioSpec, simulate_network


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def small_network():
    """n = 20 network from the standard recipe with moderate censoring."""
    return simulate_network(ScenarioSpec(n=20, m=3, beta_true=(-1.5, 1.0, 1.0, 1.0, 1.0), seed=7), 0)


def dyad_only_design(n, rng, intercept=False):
    x = rng.standard_normal((n, n))
    np.fill_diagonal(x, 0.0)
    return DesignData(np.zeros((n, 0)), rng.standard_normal((n, 1)), x, (), ("xc",), ("x1",), intercept=intercept)


def quad_moments(lo, hi):
    """Mean, variance and fourth central moment of N(0, 1) restricted to (lo, hi), by quadrature.

    The density is rescaled by exp(x0^2 / 2) at the bound nearest zero so deep
    tails do not underflow.
    """
    x0 = lo if lo > 0 else (hi if hi < 0 else 0.0)

    def w(x):
        return math.exp(-0.5 * (x * x - x0 * x0))

    def integral(f):
        return integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-12, limit=200)[0]

    z = integral(w)
    mean = integral(lambda x: x * w(x)) / z
    var = integral(lambda x: (x - mean) ** 2 * w(x)) / z
    m4 = integral(lambda x: (x - mean) ** 4 * w(x)) / z
    return mean, var, m4


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion; echoed in the terminal summary."""
    def report(criterion, title, ok, detail=""):
        line = f"criterion {criterion:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
