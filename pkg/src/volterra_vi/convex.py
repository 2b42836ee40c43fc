"""Convex energy Phi = (1/p)(|Dv|^p + |v|^p integrals) + indicator of K.

The resolvent of the subdifferential is computed by :func:`prox_step`,

    y = argmin_w  Phi(w) + |w - z|_H^2 / (2 tau),      g = (z - y) / tau,

so that ``g`` is an element of the subdifferential of Phi at ``y`` in the
H (trapezoid L2) pairing.  The inner solver is a projected Newton method
(Bertsekas two-metric style) on the tridiagonal Hessian; for p = 2 without
constraint one banded Cholesky solve is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solveh_banded

from .errors import GridMismatchError, InfeasibleError, ProxConvergenceError
from .grid import GridFunction, SpatialGrid, check_same_grid

__all__ = [
    "FEAS_TOL",
    "ConstraintSet",
    "EnergyFunctional",
    "ProxResult",
    "phi_value",
    "project_set",
    "prox_step",
    "prox_residual",
    "subgradient_check",
]

FEAS_TOL = 1e-12
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ConstraintSet:
    """Nodewise closed convex set containing 0: full space, v >= 0, or a box."""

    kind: str = "full"
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if self.kind == "full":
            object.__setattr__(self, "lower", -math.inf)
            object.__setattr__(self, "upper", math.inf)
        elif self.kind == "nonnegative":
            object.__setattr__(self, "lower", 0.0)
            object.__setattr__(self, "upper", math.inf)
        elif self.kind == "box":
            if not self.lower <= self.upper:
                raise ValueError("box needs lower <= upper")
            if not (self.lower <= 0.0 <= self.upper):
                raise ValueError("the constraint set must contain 0 (lower <= 0 <= upper)")
        else:
            raise ValueError(f"unknown constraint kind {self.kind!r}")

    @classmethod
    def full(cls):
        return cls("full")

    @classmethod
    def nonnegative(cls):
        return cls("nonnegative")

    @classmethod
    def box(cls, lower, upper):
        return cls("box", float(lower), float(upper))

    @classmethod
    def parse(cls, text: str):
        """``full``, ``nonnegative`` or ``box:<lower>,<upper>``."""
        text = text.strip().lower()
        if text in ("full", "nonnegative"):
            return cls(text)
        if text.startswith("box:"):
            lo, hi = text[4:].split(",")
            return cls.box(float(lo), float(hi))
        raise ValueError(f"unknown constraint set {text!r}")

    @property
    def is_full(self):
        return self.kind == "full"

    def clamp(self, values):
        if self.is_full:
            return np.array(values, dtype=float)
        return np.clip(values, self.lower, self.upper)

    def violation(self, values):
        """Largest nodewise distance outside the set (0 when feasible)."""
        if self.is_full:
            return 0.0
        values = np.asarray(values)
        below = np.max(self.lower - values, initial=0.0)
        above = np.max(values - self.upper, initial=0.0)
        return float(max(below, above, 0.0))


@dataclass(frozen=True)
class EnergyFunctional:
    p: float
    constraint: ConstraintSet
    grid: SpatialGrid

    def __post_init__(self):
        if not self.p >= 2:
            raise ValueError(f"need p >= 2, got {self.p}")

    # Array-level helpers; the last axis indexes nodes so rows can be batched.

    def smooth_energy(self, values):
        """(1/p) * [sum_cells h|Dv|^p + trapz(|v|^p)] without the indicator."""
        g = self.grid
        d = np.diff(values, axis=-1) / g.h
        grad_term = g.h * np.sum(np.abs(d) ** self.p, axis=-1)
        val_term = np.abs(values) ** self.p @ g.weights
        return (grad_term + val_term) / self.p

    def energy_gradient(self, values):
        """Euclidean gradient of :meth:`smooth_energy` w.r.t. nodal values."""
        g = self.grid
        p = self.p
        d = np.diff(values, axis=-1) / g.h
        flux = np.abs(d) ** (p - 2) * d
        out = g.weights * np.abs(values) ** (p - 2) * values
        out[..., 1:] += flux
        out[..., :-1] -= flux
        return out

    def h_gradient(self, values):
        """Riesz representative in the H pairing: the discrete A(v)."""
        return self.energy_gradient(values) / self.grid.weights

    def energy_hessian(self, values):
        """Tridiagonal Hessian of the smooth energy as ``(diag, offdiag)``."""
        g = self.grid
        p = self.p
        d = np.diff(values) / g.h
        c = (p - 1) * np.abs(d) ** (p - 2) / g.h
        diag = (p - 1) * g.weights * np.abs(values) ** (p - 2)
        diag[1:] += c
        diag[:-1] += c
        return diag, -c


def phi_value(phi: EnergyFunctional, v: GridFunction) -> float:
    """Phi(v), or ``math.inf`` when v violates the set by more than FEAS_TOL."""
    if v.grid != phi.grid:
        raise GridMismatchError("function and functional live on different grids")
    if phi.constraint.violation(v.values) > FEAS_TOL:
        return math.inf
    return float(phi.smooth_energy(v.values))


def project_set(cset: ConstraintSet, v: GridFunction) -> GridFunction:
    return GridFunction(v.grid, cset.clamp(v.values))


class ProxResult(NamedTuple):
    y: GridFunction
    g: GridFunction
    iterations: int
    residual: float


def prox_residual(phi: EnergyFunctional, y, z, tau) -> float:
    """|y - P(y - tau*(A(y) + (y - z)/tau))|_H, the fixed-point residual with step tau.

    Equals |y - P(z - tau*A(y))|_H; zero exactly at the resolvent point.
    """
    r = y - phi.constraint.clamp(z - tau * phi.h_gradient(y))
    return math.sqrt(max(float(phi.grid.weights @ (r * r)), 0.0))


@lru_cache(maxsize=64)
def _linear_factor(n_cells, length, tau):
    # (W/tau + S + W) for p = 2: S the cell stiffness, W the trapezoid mass
    grid = SpatialGrid(n_cells, length)
    w = grid.weights
    diag = w / tau + w
    diag[1:] += 1.0 / grid.h
    diag[:-1] += 1.0 / grid.h
    ab = np.zeros((2, grid.n_nodes))
    ab[0, 1:] = -1.0 / grid.h
    ab[1] = diag
    return cholesky_banded(ab)


def _reduced_solve(diag, off, free, rhs):
    """Solve the Hessian restricted to ``free`` indices (still tridiagonal)."""
    idx = np.flatnonzero(free)
    m = idx.size
    if m == 0:
        return np.zeros(0)
    if m == 1:
        return rhs[idx] / diag[idx]
    ab = np.zeros((2, m))
    ab[1] = diag[idx]
    adjacent = np.diff(idx) == 1
    ab[0, 1:] = np.where(adjacent, off[np.minimum(idx[:-1], off.size - 1)], 0.0)
    shift = 0.0
    while True:
        try:
            return solveh_banded(ab, rhs[idx], check_finite=False)
        except np.linalg.LinAlgError:
            # rounding destroyed definiteness (huge gradient terms); shift the diagonal
            shift = max(2 * shift, 1e-14 * float(np.max(ab[1])))
            if shift > 1e-2 * float(np.max(ab[1])):
                raise
            ab[1] = diag[idx] + shift


def prox_step(phi: EnergyFunctional, z: GridFunction, tau: float, tol: float = 1e-9,
              x0: GridFunction | None = None, max_iter: int = 500) -> ProxResult:
    """Resolvent of the subdifferential of ``phi`` with step ``tau``.

    ``x0`` is the initial iterate (default: projection of ``z``).  Converged
    when :func:`prox_residual` <= ``tol``; one more Newton step is then taken
    if it does not increase the residual.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if z.grid != phi.grid:
        raise GridMismatchError("z lives on a different grid than phi")
    grid = phi.grid
    zv = z.values
    cset = phi.constraint

    if phi.p == 2 and cset.is_full:
        rhs = grid.weights * zv / tau
        y = cho_solve_banded((_linear_factor(grid.n_cells, grid.length, tau), False), rhs)
        return _finish(phi, y, zv, tau, 1)

    w_tau = grid.weights / tau

    def objective(x):
        r = x - zv
        return phi.smooth_energy(x) + 0.5 * float(w_tau @ (r * r))

    start = zv if x0 is None else x0.values
    if x0 is not None:
        check_same_grid(z, x0)
    x = cset.clamp(start)
    fx = objective(x)
    res = prox_residual(phi, x, zv, tau)
    polished = False
    for it in range(max_iter + 1):
        if res <= tol and (polished or it == max_iter):
            return _finish(phi, x, zv, tau, it)
        if res <= tol:
            polished = True
        elif it == max_iter:
            break
        grad = phi.energy_gradient(x) + w_tau * (x - zv)
        diag, off = phi.energy_hessian(x)
        diag = diag + w_tau

        # active set: within eps of a bound with the gradient pushing outward;
        # eps is the nodal size of the diagonally scaled projected step
        eps = min(1e-2, float(np.max(np.abs(x - cset.clamp(x - grad / diag)))))
        active = np.zeros(x.size, dtype=bool)
        if not cset.is_full:
            active |= (x - cset.lower <= eps) & (grad > 0)
            active |= (cset.upper - x <= eps) & (grad < 0)
        free = ~active
        d = np.empty_like(x)
        d[free] = _reduced_solve(diag, off, free, grad)
        d[active] = grad[active] / diag[active]

        alpha = 1.0
        slack = 8 * _EPS * (abs(fx) + 1.0)
        for _ in range(60):
            xn = cset.clamp(x - alpha * d)
            predicted = alpha * grad[free] @ d[free] + grad[active] @ (x - xn)[active]
            fn = objective(xn)
            if fn <= fx - 1e-4 * predicted + slack:
                break
            alpha *= 0.5
        else:
            raise ProxConvergenceError("line search failed in prox_step", it, res)
        res_new = prox_residual(phi, xn, zv, tau)
        if polished and res_new > res:
            return _finish(phi, x, zv, tau, it)
        x, fx, res = xn, fn, res_new
    raise ProxConvergenceError(
        f"prox_step did not reach tol={tol:g} in {max_iter} iterations "
        f"(residual {res:.3e}); check tau and tol", max_iter, res)


def _finish(phi, y, zv, tau, iterations):
    grid = phi.grid
    res = prox_residual(phi, y, zv, tau)
    return ProxResult(GridFunction(grid, y), GridFunction(grid, (zv - y) / tau), iterations, res)


def _sample_points(phi: EnergyFunctional, v, g, n_samples, rng):
    """Feasible test points around ``v``, all projected: random multi-scale
    perturbations, +-s*e_i nodal steps for s in {1e-1, 1e-3, 1e-5}, and steps
    along the defect g - grad(smooth part), where a wrong g is most visible."""
    n = v.size
    scales = 10.0 ** rng.uniform(-6, 0, size=(n_samples, 1))
    rand = v + scales * rng.standard_normal((n_samples, n))
    eye = np.eye(n)
    nodal = [v + sgn * s * eye for s in (1e-1, 1e-3, 1e-5) for sgn in (1.0, -1.0)]
    defect = g - phi.h_gradient(v)
    along = v + 10.0 ** -np.arange(7.0)[:, None] * defect
    return phi.constraint.clamp(np.vstack([rand, *nodal, along]))


def subgradient_check(phi: EnergyFunctional, v: GridFunction, g: GridFunction,
                      n_samples: int = 64, seed: int = 0) -> float:
    """max over sampled feasible w of Phi(v) + (g, w - v)_H - Phi(w).

    Nonpositive (up to rounding) exactly when the samples do not refute
    ``g`` being a subgradient at ``v``.
    """
    check_same_grid(v, g)
    if v.grid != phi.grid:
        raise GridMismatchError("v lives on a different grid than phi")
    if phi.constraint.violation(v.values) > FEAS_TOL:
        raise InfeasibleError("subgradient_check needs a feasible base point")
    rng = np.random.default_rng(seed)
    pts = _sample_points(phi, v.values, g.values, n_samples, rng)
    return _max_violation(phi, v.values, g.values, pts)


def _max_violation(phi, v, g, pts):
    w = phi.grid.weights
    lhs = phi.smooth_energy(v) + (pts - v) @ (w * g)
    return float(np.max(lhs - phi.smooth_energy(pts)))
