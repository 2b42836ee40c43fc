import numpy as np
import pytest

from volterra_vi import (AdmissibleBox, ConstraintSet, ControlProblem, EnergyFunctional,
                         StateSetup, ZeroMemory, make_grid)
from volterra_vi.catalog import constant_forcing, profile
from volterra_vi.memory import builtin_kernel


def cos_setup(n_steps=1280, prox_tol=1e-9):
    """p = 2 heat instance with y0 = cos(pi x) on 64 cells, T = 0.1."""
    grid = make_grid(64, 1.0)
    phi = EnergyFunctional(2.0, ConstraintSet.full(), grid)
    return StateSetup(phi, ZeroMemory(), constant_forcing(grid.zeros()),
                      profile("cospix", grid), 0.1, n_steps, prox_tol)


def obstacle_memory_setup(n_steps=256, prox_tol=1e-9):
    """p = 3 nonnegativity obstacle with exp-decay memory, bump data, f = -1 pulling down."""
    grid = make_grid(64, 1.0)
    phi = EnergyFunctional(3.0, ConstraintSet.nonnegative(), grid)
    return StateSetup(phi, builtin_kernel("exp-decay:1"), constant_forcing(grid.constant(-1.0)),
                      profile("bump", grid), 1.0, n_steps, prox_tol)


def obstacle_setup(n_steps=256, prox_tol=1e-9):
    """Nonnegativity with f = -1 and y0 = 0: the state stays at the obstacle."""
    grid = make_grid(64, 1.0)
    phi = EnergyFunctional(2.0, ConstraintSet.nonnegative(), grid)
    return StateSetup(phi, ZeroMemory(), constant_forcing(grid.constant(-1.0)),
                      grid.zeros(), 1.0, n_steps, prox_tol)


def tiny_problem(mu=0.1, box=(-1.0, 1.0), n_steps=32):
    grid = make_grid(16, 1.0)
    phi = EnergyFunctional(2.0, ConstraintSet.full(), grid)
    setup = StateSetup(phi, ZeroMemory(), constant_forcing(grid.zeros()), grid.zeros(), 1.0, n_steps)
    return ControlProblem(setup, 4, mu, profile("bump", grid), AdmissibleBox(*box))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
