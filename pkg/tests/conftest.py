import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from orbitscale import (  # noqa: E402
    PhaseState,
    coulomb_spec,
    diamagnetic_kepler_spec,
    find_orbit_1d,
    integrate_closed_orbit,
    oscillator_spec,
    power_spec,
)

ACCEPTANCE_LINES = {}


def record_acceptance(number: int, title: str, ok: bool, detail: str = ""):
    ACCEPTANCE_LINES[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}  {detail}".rstrip()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def quartic_spec():
    return power_spec(1.0, 4, mass=1.0)


@pytest.fixture(scope="session")
def quartic_orbit(quartic_spec):
    return find_orbit_1d(quartic_spec, 1.0)


@pytest.fixture(scope="session")
def osc_orbit():
    # varpi = 1, m = 1, E = 1
    return find_orbit_1d(oscillator_spec(1.0, mass=1.0), 1.0)


@pytest.fixture(scope="session")
def kepler_orbit():
    # m = 1, k = 1; E = -0.68, eccentricity about 0.36
    spec = coulomb_spec(1.0, mass=1.0)
    return integrate_closed_orbit(spec, PhaseState([1.0, 0.0, 0.0], [0.0, 0.8, 0.0]))


@pytest.fixture(scope="session")
def dk_orbit():
    # circular orbit of radius 1 in the xy plane, E0 = -0.25
    spec = diamagnetic_kepler_spec(1.0, 0.5, mass=1.0)
    v = math.sqrt(1.25)
    return integrate_closed_orbit(spec, PhaseState([1.0, 0.0, 0.0], [0.0, v, 0.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
