import numpy as np
import pytest

from lvcert.field import FourierLoop, ThetaGeometry, radial_profile
from lvcert.model import LVSystem
from lvcert.orbitfinder import CollocationProblem, NewtonOptions, solve_candidate
from lvcert.spectrum import catalog, select_window, solve_amplitudes

RUNNING_A = [[2.0, 1.0], [1.0, 2.0]]
RUNNING_R = [3.0, 3.0]
RUNNING_TAU = 3.0

RUNNING_INI = """\
[system]
a11 = 2
a12 = 1
a21 = 1
a22 = 2
r1 = 3
r2 = 3
tau = {tau}

[solver]
K = 32
t_end = 15
"""


@pytest.fixture(scope="session")
def running_system():
    return LVSystem.build(RUNNING_A, RUNNING_R, RUNNING_TAU)


@pytest.fixture(scope="session")
def running_window(running_system):
    return select_window(running_system)


@pytest.fixture(scope="session")
def running_catalog(running_system, running_window):
    return solve_amplitudes(catalog(running_system, running_window), radial_profile(0.05, 1e-4, 1.0))


@pytest.fixture(scope="session")
def running_geometry(running_system, running_window, running_catalog):
    return ThetaGeometry.build(running_system, running_window.lambda_hi, 0.05, 1e-4, 1.0, catalog=running_catalog)


@pytest.fixture(scope="session")
def running_orbit(running_system, running_window, running_catalog):
    prob = CollocationProblem(system=running_system, K=32)
    opts = NewtonOptions(lambda_bracket=(running_window.lambda_lo, running_window.lambda_hi))
    sol = solve_candidate(running_catalog[0], prob, opts)
    assert sol is not None, "orbit finder failed on the running example"
    return sol


@pytest.fixture
def make_loop():
    """Factory for random loops with algebraically decaying coefficients."""

    def factory(seed, K=8, scale=0.1, decay=2.0):
        rng = np.random.default_rng(seed)
        damp = 1.0 / np.arange(1, K + 1) ** decay
        cos = rng.standard_normal((2, K)) * damp * scale
        sin = rng.standard_normal((2, K)) * damp * scale
        return FourierLoop.from_coefficients(cos, sin)

    return factory


@pytest.fixture
def write_ini(tmp_path):
    def factory(text, name="run.ini"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return factory


@pytest.fixture
def running_ini(write_ini):
    return write_ini(RUNNING_INI.format(tau=3))
