"""Slow, independent reference computations for the test suite.

Nothing here reuses the gradient, Hessian, projection or time-stepping code
of the modules it checks: gradients come from dense difference matrices,
projections from ``np.where``, and the linear reference evolution from a
dense LU factorization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import OracleBudgetError
from .grid import GridFunction

__all__ = [
    "OracleConfig",
    "oracle_prox",
    "oracle_linear_trajectory",
    "oracle_kernel_integral",
    "oracle_best_control",
]


@dataclass(frozen=True)
class OracleConfig:
    max_iters: int = 1_000_000
    residual_tol: float = 1e-12
    seed: int = 0
    working_tol: float = 1e-9

    def __post_init__(self):
        if not self.residual_tol * 1e3 <= self.working_tol:
            raise ValueError("oracle tolerance must be at least 1e3 tighter than the working tolerance")


def _dense_parts(grid):
    n = grid.n_nodes
    h = grid.length / grid.n_cells
    D = np.zeros((n - 1, n))
    for c in range(n - 1):
        D[c, c] = -1.0 / h
        D[c, c + 1] = 1.0 / h
    mass = np.array([h / 2 if i in (0, n - 1) else h for i in range(n)])
    return D, mass


def _box_of(constraint):
    return constraint.lower, constraint.upper


def _proj(x, lo, hi):
    x = np.where(x < lo, lo, x)
    return np.where(x > hi, hi, x)


def oracle_prox(phi, z: GridFunction, tau: float, cfg: OracleConfig = OracleConfig()) -> GridFunction:
    """Projected gradient (H metric) with backtracking: each iteration tries
    twice the previous step (capped at tau) and halves it until the gradient
    changes by at most |x+ - x|_H / s and the objective has not increased.
    The gradient test keeps working below the rounding level of the objective.
    Stops when |y - P(z - tau A(y))|_H <= residual_tol."""
    D, mass = _dense_parts(z.grid)
    p = phi.p
    h = z.grid.length / z.grid.n_cells
    lo, hi = _box_of(phi.constraint)
    zv = np.array(z.values)

    def energy(x):
        d = D @ x
        return (h * np.sum(np.abs(d) ** p) + np.sum(mass * np.abs(x) ** p)) / p + \
            np.sum(mass * (x - zv) ** 2) / (2 * tau)

    def a_op(x):
        d = D @ x
        return (h * D.T @ (np.abs(d) ** (p - 2) * d)) / mass + np.abs(x) ** (p - 2) * x

    def residual(x):
        r = x - _proj(zv - tau * a_op(x), lo, hi)
        return math.sqrt(np.sum(mass * r * r))

    def grad_of(x):
        return a_op(x) + (x - zv) / tau

    def h_len(v):
        return math.sqrt(np.sum(mass * v * v))

    x = _proj(zv, lo, hi)
    fx, gx = energy(x), grad_of(x)
    slack = 16 * np.finfo(float).eps
    s = tau
    for _ in range(cfg.max_iters):
        if residual(x) <= cfg.residual_tol:
            return GridFunction(z.grid, x)
        s = min(2 * s, tau)
        while True:
            xn = _proj(x - s * gx, lo, hi)
            if np.array_equal(xn, x):
                break
            fn, gn = energy(xn), grad_of(xn)
            # local Lipschitz estimate <= 1/s, energy not increased beyond rounding
            if h_len(gn - gx) * s <= h_len(xn - x) and fn <= fx + slack * abs(fx):
                break
            s *= 0.5
            if s < 1e-300:
                raise OracleBudgetError("oracle_prox step underflow")
        if np.array_equal(xn, x):
            # no representable progress: accept when the residual is at rounding level
            if residual(x) <= 1e3 * cfg.residual_tol:
                return GridFunction(z.grid, x)
            raise OracleBudgetError(f"oracle_prox stalled at residual {residual(x):.3e}")
        x, fx, gx = xn, fn, gn
    raise OracleBudgetError(f"oracle_prox did not converge in {cfg.max_iters} iterations")


def oracle_linear_trajectory(grid, y0, T, n_steps, f=None, kernel=None):
    """Dense implicit Euler for the p = 2, unconstrained case:

        (M/tau + S + M) y^k = M y^{k-1}/tau + M (f(t_k) - sum_{j<k} tau b(t_k,t_j) y^j),

    with S the stiffness and M the lumped (trapezoid) mass matrix.
    Returns the array of states, shape (n_steps + 1, n_nodes).
    """
    D, mass = _dense_parts(grid)
    h = grid.length / grid.n_cells
    tau = T / n_steps
    Mm = np.diag(mass)
    S = h * D.T @ D
    lu = lu_factor(Mm / tau + S + Mm)
    Y = np.zeros((n_steps + 1, grid.n_nodes))
    Y[0] = np.asarray(y0, dtype=float)
    for k in range(1, n_steps + 1):
        t = k * tau
        rhs = Y[k - 1] / tau
        if f is not None:
            rhs = rhs + np.asarray(f(t), dtype=float)
        if kernel is not None:
            mem = np.zeros(grid.n_nodes)
            for j in range(k):
                mem += tau * kernel(t, j * tau) * Y[j]
            rhs = rhs - mem
        Y[k] = lu_solve(lu, mass * rhs)
    return Y


def oracle_kernel_integral(b, y, t, n_points=1_000_000):
    """int_0^t b(t, s) y(s) ds by the composite midpoint rule (scalar y)."""
    s = (np.arange(n_points) + 0.5) * (t / n_points)
    return float(np.sum(b(t, s) * y(s)) * (t / n_points))


MAX_CONTROL_SAMPLES = 100_000


def oracle_best_control(problem, n_samples: int, seed: int = 0, max_corners: int = 1024):
    """Best of: u = 0 (projected), ``n_samples`` uniform box draws and up to
    ``max_corners`` random vertices of the box.  Tiny instances only."""
    from .control import evaluate_cost

    if not 0 <= n_samples <= MAX_CONTROL_SAMPLES:
        raise OracleBudgetError(f"n_samples must lie in [0, {MAX_CONTROL_SAMPLES}]")
    grid = problem.setup.grid
    if grid.n_cells > 16 or problem.n_intervals > 4:
        raise OracleBudgetError("oracle_best_control is limited to <= 16 cells and <= 4 intervals")
    lo, hi = problem.box.lower, problem.box.upper
    shape = (problem.n_intervals, grid.n_nodes)
    rng = np.random.default_rng(seed)
    zero = problem.zero_control()
    candidates = [np.full(shape, min(max(0.0, lo), hi))]
    if lo < hi:
        candidates += [rng.uniform(lo, hi, shape) for _ in range(n_samples)]
        n_coords = shape[0] * shape[1]
        n_corners = min(max_corners, 2 ** n_coords)
        candidates += [np.where(rng.integers(0, 2, shape) == 1, hi, lo) for _ in range(n_corners)]
    best_u, best_J = None, math.inf
    for vals in candidates:
        u = zero.with_values(vals)
        J = evaluate_cost(problem, u)[0]
        if J < best_J:
            best_u, best_J = u, J
    return best_u, best_J
