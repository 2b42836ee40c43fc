import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from volterra_vi import GridFunction, h_inner, h_norm, make_grid, v_norm
from volterra_vi.errors import DiscretizationError, GridMismatchError
from volterra_vi.grid import read_grid_function, write_grid_function


def test_grid_examples():
    g = make_grid(4, 1.0)
    assert g.h == 0.25
    np.testing.assert_array_equal(g.nodes, [0, 0.25, 0.5, 0.75, 1.0])
    g2 = make_grid(2, 2.0)
    assert g2.h == 1.0
    np.testing.assert_array_equal(g2.nodes, [0, 1, 2])


@pytest.mark.parametrize("n,L", [(1, 1.0), (0, 1.0), (4, 0.0), (4, -1.0)])
def test_grid_rejects_bad_input(n, L):
    with pytest.raises(DiscretizationError):
        make_grid(n, L)


def test_weights_sum_to_length():
    g = make_grid(7, 3.0)
    assert math.isclose(g.weights.sum(), 3.0)
    assert not g.weights.flags.writeable


def test_h_inner_examples():
    g = make_grid(4, 1.0)
    one = g.constant(1.0)
    x = g.sample(lambda x: x)
    assert h_inner(one, one) == 1.0
    assert h_inner(g.zeros(), x) == 0.0
    assert h_inner(x, x) == 0.34375


def test_v_norm_examples():
    g = make_grid(4, 1.0)
    assert v_norm(g.constant(1.0), 2) == 1.0
    assert v_norm(g.zeros(), 3) == 0.0
    assert math.isclose(v_norm(g.sample(lambda x: x), 2), math.sqrt(1.34375), rel_tol=1e-15)
    with pytest.raises(ValueError):
        v_norm(g.zeros(), 1.5)


def test_v_norm_no_overflow():
    g = make_grid(4, 1.0)
    assert math.isfinite(v_norm(g.constant(1e200), 4))


def test_grid_mismatch():
    with pytest.raises(GridMismatchError):
        h_inner(make_grid(4).zeros(), make_grid(5).zeros())


def test_non_finite_values_rejected():
    with pytest.raises(ValueError):
        GridFunction(make_grid(2), [0.0, np.nan, 1.0])


vals = st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6)


@settings(max_examples=100, deadline=None)
@given(vals, vals)
def test_cauchy_schwarz(a, b):
    g = make_grid(5, 1.3)
    u, v = GridFunction(g, a), GridFunction(g, b)
    assert abs(h_inner(u, v)) <= h_norm(u) * h_norm(v) * (1 + 1e-12) + 1e-12


@settings(max_examples=100, deadline=None)
@given(vals)
def test_h_norm_dominated_by_v_norm(a):
    g = make_grid(5, 1.0)
    u = GridFunction(g, a)
    assert h_norm(u) <= v_norm(u, 2) * (1 + 1e-12) + 1e-12


def test_trapezoid_second_order():
    errs = []
    for n in (16, 32, 64):
        u = make_grid(n).sample(np.sin)
        errs.append(abs(h_norm(u) ** 2 - (0.5 - math.sin(2) / 4)))
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert 3.5 < errs[1] / errs[2] < 4.5


def test_csv_round_trip(tmp_path):
    u = make_grid(9, 2.5).sample(lambda x: np.exp(x) / 3)
    write_grid_function(tmp_path / "u.csv", u)
    back = read_grid_function(tmp_path / "u.csv")
    assert back.grid == u.grid
    np.testing.assert_array_equal(back.values, u.values)
