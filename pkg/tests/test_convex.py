import math

import numpy as np
import pytest

from volterra_vi import (ConstraintSet, EnergyFunctional, GridFunction, h_inner, h_norm,
                         make_grid, phi_value, project_set, prox_step, subgradient_check)
from volterra_vi.convex import prox_residual
from volterra_vi.errors import InfeasibleError
from volterra_vi.oracle import oracle_prox

SETS = [ConstraintSet.full(), ConstraintSet.nonnegative(), ConstraintSet.box(-0.3, 0.5)]


def test_parse_sets():
    assert ConstraintSet.parse("full") == ConstraintSet.full()
    assert ConstraintSet.parse("nonnegative") == ConstraintSet.nonnegative()
    assert ConstraintSet.parse("box:-1,2") == ConstraintSet.box(-1, 2)
    for bad in ("box:1,2", "box:0", "cone"):
        with pytest.raises(ValueError):
            ConstraintSet.parse(bad)


@pytest.mark.parametrize("p", [2.0, 3.0, 4.5])
@pytest.mark.parametrize("cset", SETS)
def test_phi_zero(p, cset):
    g = make_grid(8)
    assert phi_value(EnergyFunctional(p, cset, g), g.zeros()) == 0.0


def test_phi_examples():
    g = make_grid(8)
    phi = EnergyFunctional(2.0, ConstraintSet.nonnegative(), g)
    assert phi_value(phi, g.constant(1.0)) == 0.5
    v = g.zeros().values.copy()
    v[3] = -0.1
    assert phi_value(phi, GridFunction(g, v)) == math.inf
    v[3] = -1e-13  # within the feasibility tolerance
    assert math.isfinite(phi_value(phi, GridFunction(g, v)))


def test_projection_examples():
    g2 = make_grid(2, 2.0)
    np.testing.assert_array_equal(
        project_set(ConstraintSet.box(0, 1), GridFunction(g2, [-0.5, 0.5, 1.5])).values, [0, 0.5, 1])
    np.testing.assert_array_equal(
        project_set(ConstraintSet.nonnegative(), GridFunction(g2, [-1, 2, 0])).values, [0, 2, 0])
    u = GridFunction(g2, [-3, 1, 7])
    np.testing.assert_array_equal(project_set(ConstraintSet.full(), u).values, u.values)


@pytest.mark.parametrize("cset", SETS)
def test_projection_idempotent_nonexpansive(cset, rng):
    g = make_grid(10)
    for _ in range(50):
        u = GridFunction(g, rng.normal(size=11))
        v = GridFunction(g, rng.normal(size=11))
        pu, pv = project_set(cset, u), project_set(cset, v)
        np.testing.assert_array_equal(project_set(cset, pu).values, pu.values)
        assert h_norm(pu - pv) <= h_norm(u - v) + 1e-15


def test_prox_zero():
    g = make_grid(8)
    for cset in SETS:
        for p in (2.0, 3.0):
            r = prox_step(EnergyFunctional(p, cset, g), g.zeros(), 0.1)
            assert np.all(r.y.values == 0) and np.all(r.g.values == 0)


@pytest.mark.parametrize("tau", [0.01, 0.5, 3.0])
def test_prox_constant(tau):
    g = make_grid(12, 2.0)
    c = 0.7
    r = prox_step(EnergyFunctional(2.0, ConstraintSet.full(), g), g.constant(c), tau)
    np.testing.assert_allclose(r.y.values, c / (1 + tau), rtol=0, atol=1e-13)


def test_prox_matches_oracle(rng):
    g = make_grid(8, 1.0)
    phi = EnergyFunctional(3.0, ConstraintSet.nonnegative(), g)
    z = GridFunction(g, rng.normal(size=9))
    r = prox_step(phi, z, 0.1)
    ref = oracle_prox(phi, z, 0.1)
    assert h_norm(r.y - ref) <= 1e-7
    assert r.residual <= 1e-9


@pytest.mark.parametrize("p", [2.0, 2.5, 3.0, 4.0])
@pytest.mark.parametrize("cset", SETS)
def test_prox_residual_and_subgradient(p, cset, rng):
    g = make_grid(24, 1.0)
    phi = EnergyFunctional(p, cset, g)
    z = GridFunction(g, 2 * rng.normal(size=25))
    r = prox_step(phi, z, 0.05, tol=1e-10)
    assert prox_residual(phi, r.y.values, z.values, 0.05) <= 1e-10
    assert subgradient_check(phi, r.y, r.g) <= 1e-9


@pytest.mark.parametrize("p", [2.0, 3.0])
@pytest.mark.parametrize("cset", SETS)
def test_prox_nonexpansive_monotone(p, cset, rng):
    g = make_grid(16)
    phi = EnergyFunctional(p, cset, g)
    for _ in range(20):
        tau = 10 ** rng.uniform(-3, 0)
        z1 = GridFunction(g, rng.normal(size=17))
        z2 = GridFunction(g, rng.normal(size=17))
        r1, r2 = prox_step(phi, z1, tau), prox_step(phi, z2, tau)
        assert h_norm(r1.y - r2.y) <= h_norm(z1 - z2) + 1e-8
        assert h_inner(r1.g - r2.g, r1.y - r2.y) >= -1e-8


def test_phi_convex_and_coercive(rng):
    g = make_grid(10)
    phi = EnergyFunctional(3.0, ConstraintSet.box(-1, 1), g)
    for _ in range(50):
        u = GridFunction(g, rng.uniform(-1, 1, 11))
        v = GridFunction(g, rng.uniform(-1, 1, 11))
        lam = rng.uniform()
        mix = u * lam + v * (1 - lam)
        assert phi_value(phi, mix) <= lam * phi_value(phi, u) + (1 - lam) * phi_value(phi, v) + 1e-12
    # Phi(v) = ||v||^p / p on K
    from volterra_vi import v_norm
    v = GridFunction(g, rng.uniform(-1, 1, 11))
    assert math.isclose(phi_value(phi, v), v_norm(v, 3.0) ** 3 / 3, rel_tol=1e-12)


def test_warm_start_same_answer(rng):
    g = make_grid(32)
    phi = EnergyFunctional(3.0, ConstraintSet.nonnegative(), g)
    z = GridFunction(g, rng.normal(size=33))
    a = prox_step(phi, z, 0.1)
    b = prox_step(phi, z, 0.1, x0=g.constant(5.0))
    assert h_norm(a.y - b.y) <= 1e-9


def test_prox_rejects_bad_tau():
    g = make_grid(4)
    with pytest.raises(ValueError):
        prox_step(EnergyFunctional(2.0, ConstraintSet.full(), g), g.zeros(), 0.0)


def test_subgradient_check_examples():
    g = make_grid(8)
    phi = EnergyFunctional(2.0, ConstraintSet.full(), g)
    assert subgradient_check(phi, g.zeros(), g.zeros()) <= 1e-12
    assert subgradient_check(phi, g.zeros(), g.constant(10.0)) > 0
    nn = EnergyFunctional(2.0, ConstraintSet.nonnegative(), g)
    with pytest.raises(InfeasibleError):
        subgradient_check(nn, g.constant(-1.0), g.zeros())


def test_subgradient_normal_cone():
    # at the obstacle y = 0 every g <= 0 is a subgradient of the indicator part
    g = make_grid(8)
    phi = EnergyFunctional(2.0, ConstraintSet.nonnegative(), g)
    assert subgradient_check(phi, g.zeros(), g.constant(-1.0)) <= 1e-12
    assert subgradient_check(phi, g.zeros(), g.constant(1.0)) > 0
