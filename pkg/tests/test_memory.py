import math
import warnings

import numpy as np
import pytest

from volterra_vi import (ComposedMemory, History, KernelMemory, ZeroMemory, builtin_kernel,
                         composed_apply, h_norm, kernel_apply, lipschitz_bound_check, make_grid)
from volterra_vi.errors import MemoryEvaluationError
from volterra_vi.oracle import oracle_kernel_integral

GRID = make_grid(8)
ONE = KernelMemory(lambda t, s: np.ones_like(s), 1.0, "one")


def const_history(c, k, tau):
    return History(GRID, np.arange(k) * tau, np.full((k, GRID.n_nodes), c))


def random_history(rng, k, tau):
    return History(GRID, np.arange(k) * tau, rng.normal(size=(k, GRID.n_nodes)))


def test_zero_kernel():
    hist = random_history(np.random.default_rng(0), 5, 0.1)
    assert np.all(kernel_apply(KernelMemory(lambda t, s: 0 * s, 0.0), hist, 0.5).values == 0)
    assert np.all(ZeroMemory().apply(hist, 0.5).values == 0)


@pytest.mark.parametrize("k", [1, 7, 40])
def test_constant_kernel_constant_history(k):
    tau = 0.025
    out = kernel_apply(ONE, const_history(1.5, k, tau), k * tau)
    np.testing.assert_allclose(out.values, 1.5 * k * tau, rtol=1e-14)


def test_empty_history_gives_zero():
    assert np.all(ONE.apply(History.empty(GRID), 0.0).values == 0)


def test_exp_decay_against_quadrature():
    lam_kernel = builtin_kernel("exp-decay:1")
    exact = oracle_kernel_integral(lambda t, s: np.exp(-(t - s)), lambda s: np.ones_like(s), 1.0)
    assert abs(exact - (1 - math.exp(-1))) < 1e-12
    errs = []
    for n in (100, 200, 400, 800):
        tau = 1.0 / n
        val = kernel_apply(lam_kernel, const_history(1.0, n, tau), 1.0).values[0]
        errs.append(abs(val - exact))
    assert errs[2] <= 2 * (1 / 400)
    for a, b in zip(errs, errs[1:]):
        assert 1.8 < a / b < 2.2


def test_composed_reduces_to_kernel(rng):
    comp = ComposedMemory(lambda t, v: v, 1.0, lambda t, s, w: w, 1.0)
    hist = random_history(rng, 9, 0.1)
    np.testing.assert_allclose(composed_apply(comp, hist, 0.9).values,
                               kernel_apply(ONE, hist, 0.9).values, rtol=0, atol=1e-15)


def test_composed_zero_outer(rng):
    comp = ComposedMemory(lambda t, v: 0 * v, 0.0, lambda t, s, w: w, 1.0)
    assert np.all(composed_apply(comp, random_history(rng, 4, 0.1), 0.4).values == 0)


def test_composed_scalars_cancel():
    comp = ComposedMemory(lambda t, v: 0.5 * v, 0.5, lambda t, s, w: 2 * w, 2.0)
    assert comp.lipschitz == 1.0
    out = composed_apply(comp, const_history(0.3, 12, 0.05), 0.6)
    np.testing.assert_allclose(out.values, 0.3 * 12 * 0.05, rtol=1e-14)


def test_lipschitz_examples(rng):
    h = random_history(rng, 10, 0.1)
    assert lipschitz_bound_check(ONE, h, h) == 0.0
    slack = lipschitz_bound_check(ONE, const_history(1.0, 10, 0.1), const_history(0.0, 10, 0.1))
    assert abs(slack) <= 1e-15


@pytest.mark.parametrize("name", ["zero", "constant:2", "exp-decay:1", "sin-ts"])
def test_lipschitz_random_pairs(name):
    op = builtin_kernel(name)
    rng = np.random.default_rng(7)
    for _ in range(100):
        k = int(rng.integers(2, 30))
        tau = 1.0 / k
        assert lipschitz_bound_check(op, random_history(rng, k, tau), random_history(rng, k, tau)) >= -1e-10


def test_lipschitz_composed_nonlinear():
    comp = ComposedMemory(lambda t, v: np.sin(v), 1.0, lambda t, s, w: np.tanh(w) * math.cos(t * s), 1.0)
    rng = np.random.default_rng(3)
    for _ in range(50):
        assert lipschitz_bound_check(comp, random_history(rng, 12, 0.1), random_history(rng, 12, 0.1)) >= -1e-10


def test_memory_linear_and_causal(rng):
    op = builtin_kernel("sin-ts")
    h1, h2 = random_history(rng, 6, 0.2), random_history(rng, 6, 0.2)
    comb = History(GRID, h1.times, 2 * h1.states - 3 * h2.states)
    lhs = op.apply(comb, 1.2).values
    rhs = 2 * op.apply(h1, 1.2).values - 3 * op.apply(h2, 1.2).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)
    # evaluating on a prefix never looks at later entries
    altered = History(GRID, h1.times, np.vstack([h1.states[:3], 100 + h1.states[3:]]))
    np.testing.assert_array_equal(op.apply(h1.prefix(3), 0.6).values,
                                  op.apply(altered.prefix(3), 0.6).values)


def test_memory_bounded(rng):
    op = builtin_kernel("exp-decay:0.5")
    h = random_history(rng, 20, 0.05)
    bound = op.lipschitz * sum(0.05 * h_norm(h_fn) for h_fn in
                               (GRID.zeros() + s for s in h.states))
    assert h_norm(op.apply(h, 1.0)) <= bound + 1e-12


def test_check_bound_warns():
    op = KernelMemory(lambda t, s: 3 + 0 * s, 1.0, "too-big")
    with pytest.warns(RuntimeWarning):
        op.check_bound(1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        builtin_kernel("exp-decay:1").check_bound(1.0)


def test_non_finite_kernel_raises():
    op = KernelMemory(lambda t, s: np.log(s), 1.0, "singular")
    with np.errstate(divide="ignore"), pytest.raises(MemoryEvaluationError):
        op.apply(const_history(1.0, 3, 0.1), 0.3)


def test_builtin_kernel_names():
    assert isinstance(builtin_kernel("zero"), ZeroMemory)
    for bad in ("gauss", "exp-decay", "exp-decay:-1", "zero:1"):
        with pytest.raises(ValueError):
            builtin_kernel(bad)


def test_history_validation():
    with pytest.raises(ValueError):
        History(GRID, [0.0, 0.0], np.zeros((2, 9)))
