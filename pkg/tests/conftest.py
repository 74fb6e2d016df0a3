"""Shared fixtures.

Expensive objects (the Sobolev profile on the 6-box, the fine target splits)
are built once per session.
"""

import numpy as np
import pytest

from curlground.grid import build_grid
from curlground.nehari import EnergyParams, GroundStateOptions, minimize_on_manifold
from curlground.operator import Potential, assemble
from curlground.sobolev import SobolevOptions, solve_sobolev
from curlground.spectral import split

# V = 1 + 0.5 cos(2 pi x3) - 3 exp(-r^2) - 7 exp(-4 (r-2)^2): two negative modes on the 3-box.
INDEFINITE = {
    "kind": "sum",
    "terms": [
        {"kind": "constant", "value": 1.0},
        {"kind": "analytic-periodic", "expr": "cos2pi_z", "amplitude": 0.5},
        {"kind": "analytic-periodic", "expr": "well_r+ring_r", "amplitude": [3.0, 7.0]},
    ],
}

PHI_GRID = (6.0, 6.0, 192, 385)
TARGET_GRID = (3.0, 3.0, 384, 769)
SMALL_GRID = (3.0, 3.0, 48, 97)

ACCEPTANCE = {}


def record(criterion, ok, detail=""):
    """Store a PASS/FAIL line for the terminal summary."""
    ACCEPTANCE[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}  {detail}")


@pytest.fixture(scope="session")
def indefinite_potential():
    return Potential.from_spec(INDEFINITE)


@pytest.fixture(scope="session")
def sobolev_result():
    return solve_sobolev(build_grid(*PHI_GRID), SobolevOptions())


@pytest.fixture(scope="session")
def Phi(sobolev_result):
    return sobolev_result.Phi


@pytest.fixture(scope="session")
def S_hat(sobolev_result):
    return sobolev_result.S_hat


@pytest.fixture(scope="session")
def target_grid():
    return build_grid(*TARGET_GRID)


@pytest.fixture(scope="session")
def target_split_zero(target_grid):
    return split(assemble(target_grid))


@pytest.fixture(scope="session")
def target_split_indefinite(target_grid, indefinite_potential):
    return split(assemble(target_grid, indefinite_potential))


@pytest.fixture(scope="session")
def small_split_zero():
    return split(assemble(build_grid(*SMALL_GRID)))


@pytest.fixture(scope="session")
def small_split_indefinite(indefinite_potential):
    return split(assemble(build_grid(*SMALL_GRID), indefinite_potential))


@pytest.fixture(scope="session")
def ground_zero_p4(small_split_zero, S_hat):
    params = EnergyParams(4.0, small_split_zero.op, small_split_zero)
    return params, minimize_on_manifold(params, GroundStateOptions(S_hat=S_hat))


@pytest.fixture(scope="session")
def ground_indefinite_p5(small_split_indefinite, S_hat):
    params = EnergyParams(5.0, small_split_indefinite.op, small_split_indefinite)
    return params, minimize_on_manifold(params, GroundStateOptions(S_hat=S_hat))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(grid, rng, smooth=True):
    """Random interior field; smooth fields are random modes times a bump."""
    from curlground.grid import Field

    R, Z = grid.mesh()
    if smooth:
        vals = np.zeros(grid.shape)
        for _ in range(4):
            kr, kz, ph = rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0), rng.uniform(0, 2 * np.pi)
            vals += rng.standard_normal() * np.sin(kr * R) * np.cos(kz * Z + ph)
        vals *= R * np.exp(-(R**2 + Z**2) / 2.0)
    else:
        vals = rng.standard_normal(grid.shape)
    vals[grid.boundary_mask] = 0.0
    return Field(grid, vals)
