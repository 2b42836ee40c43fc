"""Rothe time stepping for y' + dPhi(y) + B(y) = f (+ Cu), y(0) = y0.

Each step is implicit in Phi (one resolvent) and explicit in the memory:

    y^k = prox_{tau Phi}( y^{k-1} + tau (f^k + e^k - B^k) ),
    B^k = B(y^0..y^{k-1})(t_k),

where f^k, e^k are sampled at the right endpoint t_k.  The subgradient is
recorded as the scheme residual g^k = f^k + e^k - B^k - (y^k - y^{k-1})/tau,
which makes the discrete inclusion identity hold by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .convex import FEAS_TOL, EnergyFunctional, phi_value, prox_step, _max_violation, _sample_points
from .errors import DiscretizationError, GridMismatchError, ProxConvergenceError, StateSolveError
from .grid import GridFunction, v_norm
from .memory import MemoryOperator

__all__ = [
    "StateSetup",
    "StateTrajectory",
    "EstimateReport",
    "ConvergenceStudy",
    "solve_state",
    "energy_estimate_report",
    "vi_gaps",
    "vi_residual_check",
    "subgradient_violations",
    "inclusion_residual_check",
    "convergence_order",
    "zero_forcing",
]


def zero_forcing(t):
    return 0.0


def _nodal(obj, n_nodes, what="forcing"):
    vals = obj.values if isinstance(obj, GridFunction) else obj
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (n_nodes,))
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"non-finite {what}")
    return vals


@dataclass(frozen=True)
class StateSetup:
    """Data of the problem P(Phi, B, f, y0) on (0, T) with ``n_steps`` steps.

    ``f`` maps a time to nodal values (array, scalar or GridFunction).
    """

    phi: EnergyFunctional
    memory: MemoryOperator
    f: Callable
    y0: GridFunction
    T: float
    n_steps: int
    prox_tol: float = 1e-9

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise DiscretizationError(f"horizon T must be positive, got {self.T}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DiscretizationError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not self.prox_tol > 0:
            raise ValueError("prox_tol must be positive")
        if self.y0.grid != self.phi.grid:
            raise GridMismatchError("y0 and phi live on different grids")
        if not math.isfinite(phi_value(self.phi, self.y0)):
            raise ValueError("y0 must lie in dom(Phi) (violates the constraint set)")

    @property
    def grid(self):
        return self.phi.grid

    @property
    def tau(self):
        return self.T / self.n_steps

    @property
    def times(self):
        return np.arange(self.n_steps + 1) * self.tau


@dataclass(frozen=True)
class StateTrajectory:
    """Discrete solution; row k of ``states`` is y^k, row k-1 of the per-step
    arrays belongs to step k (times[k])."""

    grid: object
    tau: float
    times: np.ndarray
    states: np.ndarray
    subgradients: np.ndarray
    memory: np.ndarray
    forcing: np.ndarray
    iterations: np.ndarray

    @property
    def n_steps(self):
        return self.states.shape[0] - 1

    def state(self, k) -> GridFunction:
        return GridFunction(self.grid, self.states[k])

    @property
    def final(self) -> GridFunction:
        return self.state(self.n_steps)

    def velocities(self):
        return np.diff(self.states, axis=0) / self.tau


def solve_state(setup: StateSetup, forcing_extra: Callable | None = None,
                warm_start: bool = True, stop_after: int | None = None) -> StateTrajectory:
    """Run the scheme.  ``warm_start`` starts each prox at y^{k-1}, otherwise
    at zero; ``stop_after`` truncates the run after that many steps."""
    grid = setup.grid
    n = grid.n_nodes
    tau = setup.tau
    n_run = setup.n_steps if stop_after is None else int(stop_after)
    if not 0 <= n_run <= setup.n_steps:
        raise ValueError("stop_after must lie in [0, n_steps]")
    times = setup.times[: n_run + 1]
    extra = forcing_extra or zero_forcing
    setup.memory.check_bound(setup.T)

    Y = np.empty((n_run + 1, n))
    Y[0] = setup.y0.values
    G = np.empty((n_run, n))
    M = np.empty((n_run, n))
    F = np.empty((n_run, n))
    iters = np.zeros(n_run, dtype=int)
    zero = grid.zeros()
    for k in range(1, n_run + 1):
        t = times[k]
        try:
            fk = _nodal(setup.f(t), n) + _nodal(extra(t), n)
        except ValueError as exc:
            raise StateSolveError(f"step {k}: {exc}", step=k) from exc
        bk = setup.memory.evaluate(times[:k], Y[:k], t)
        z = GridFunction(grid, Y[k - 1] + tau * (fk - bk))
        x0 = GridFunction(grid, Y[k - 1]) if warm_start else zero
        try:
            res = prox_step(setup.phi, z, tau, setup.prox_tol, x0=x0)
        except ProxConvergenceError as exc:
            raise StateSolveError(f"prox failed at step {k} (t={t:.6g}): {exc}", step=k) from exc
        Y[k] = res.y.values
        G[k - 1] = fk - bk - (Y[k] - Y[k - 1]) / tau
        M[k - 1] = bk
        F[k - 1] = fk
        iters[k - 1] = res.iterations
    return StateTrajectory(grid, tau, times, Y, G, M, F, iters)


@dataclass(frozen=True)
class EstimateReport:
    lhs: float
    rhs_core: float
    ratio: float
    trivial_zero: bool = False


def energy_estimate_report(traj: StateTrajectory, setup: StateSetup) -> EstimateReport:
    """Discrete terms of the a priori estimate.

    lhs = max_k|y^k|^2 + max_k ||y^k||^p + sum_k tau |(y^k - y^{k-1})/tau|^2
    rhs_core = |y0|^2 + Phi(y0) + sum_k tau |f^k + (Cu)^k|^2

    ``ratio`` is lhs / rhs_core; with rhs_core = 0 it is 0/0 -> nan and
    ``trivial_zero`` is set, or inf if lhs > 0.
    """
    w = traj.grid.weights
    p = setup.phi.p
    sq = lambda a: np.maximum(a * a @ w, 0.0)
    vnorm_p = max(v_norm(traj.state(k), p) ** p for k in range(traj.n_steps + 1))
    lhs = float(np.max(sq(traj.states)) + vnorm_p + traj.tau * np.sum(sq(traj.velocities())))
    rhs = float(sq(setup.y0.values) + phi_value(setup.phi, setup.y0)
                + traj.tau * np.sum(sq(traj.forcing)))
    if rhs > 0:
        return EstimateReport(lhs, rhs, lhs / rhs)
    if lhs == 0:
        return EstimateReport(0.0, 0.0, math.nan, trivial_zero=True)
    return EstimateReport(lhs, rhs, math.inf)


def vi_gaps(traj: StateTrajectory, setup: StateSetup, n_test: int = 100, seed: int = 0):
    """Per step, min over v of ((y^k - y^{k-1})/tau + A(y^k) + B^k - f^k - (Cu)^k, v - y^k)_H.

    Test points are y^k itself plus ``n_test`` projected random perturbations.
    """
    rng = np.random.default_rng(seed)
    phi = setup.phi
    w = traj.grid.weights
    cset = phi.constraint
    vel = traj.velocities()
    gaps = np.empty(traj.n_steps)
    for k in range(1, traj.n_steps + 1):
        y = traj.states[k]
        r = vel[k - 1] + phi.h_gradient(y) + traj.memory[k - 1] - traj.forcing[k - 1]
        scales = 10.0 ** rng.uniform(-3, 1, size=(n_test, 1))
        V = cset.clamp(y + scales * rng.standard_normal((n_test, y.size)))
        gaps[k - 1] = min(0.0, float(np.min((V - y) @ (w * r))))
    return gaps


def vi_residual_check(traj, setup, n_test: int = 100, seed: int = 0) -> float:
    gaps = vi_gaps(traj, setup, n_test, seed)
    return float(np.min(gaps, initial=0.0))


def subgradient_violations(traj: StateTrajectory, setup: StateSetup,
                           n_samples: int = 32, seed: int = 0):
    """subgradient_check of (y^k, g^k) for every step, vectorized."""
    rng = np.random.default_rng(seed)
    phi = setup.phi
    out = np.empty(traj.n_steps)
    for k in range(1, traj.n_steps + 1):
        y = traj.states[k]
        if phi.constraint.violation(y) > FEAS_TOL:
            out[k - 1] = math.inf
            continue
        g = traj.subgradients[k - 1]
        out[k - 1] = _max_violation(phi, y, g, _sample_points(phi, y, g, n_samples, rng))
    return out


def inclusion_residual_check(traj, setup, n_samples: int = 32, seed: int = 0) -> float:
    return float(np.max(subgradient_violations(traj, setup, n_samples, seed), initial=0.0))


@dataclass(frozen=True)
class ConvergenceStudy:
    n_steps: tuple
    taus: tuple
    errors: tuple
    rates: tuple
    exact: bool


def trajectory_error(traj: StateTrajectory, reference: StateTrajectory) -> float:
    """max_k |y^k - y_ref(t_k)|_H; the reference step count must be a multiple."""
    if reference.n_steps % traj.n_steps:
        raise DiscretizationError("reference step count must be a multiple of the coarse one")
    stride = reference.n_steps // traj.n_steps
    d = traj.states - reference.states[::stride]
    return float(np.sqrt(np.max(np.maximum(d * d @ traj.grid.weights, 0.0))))


def convergence_order(setup: StateSetup, n_steps_list: Sequence[int],
                      reference: StateTrajectory | None = None,
                      forcing_extra: Callable | None = None,
                      ref_factor: int = 16) -> ConvergenceStudy:
    """Observed orders log(e_i/e_{i+1}) / log(tau_i/tau_{i+1}) against a fine run.

    Without ``reference`` one is computed with ``ref_factor`` x the finest
    step count.  Pairs of zero errors get rate ``inf`` and ``exact=True``.
    """
    n_list = sorted(int(n) for n in n_steps_list)
    if len(n_list) < 3:
        raise ValueError("convergence_order needs at least 3 step counts")
    if reference is None:
        reference = solve_state(replace(setup, n_steps=n_list[-1] * ref_factor), forcing_extra)
    if reference.n_steps < 16 * n_list[-1]:
        raise DiscretizationError("reference step must be <= min(tau)/16")
    errors, taus = [], []
    for n in n_list:
        traj = solve_state(replace(setup, n_steps=n), forcing_extra)
        errors.append(trajectory_error(traj, reference))
        taus.append(traj.tau)
    rates = []
    for (e0, e1), (t0, t1) in zip(zip(errors, errors[1:]), zip(taus, taus[1:])):
        if e0 == 0.0 and e1 == 0.0:
            rates.append(math.inf)
        elif e1 == 0.0 or e0 == 0.0:
            rates.append(math.nan)
        else:
            rates.append(math.log(e0 / e1) / math.log(t0 / t1))
    exact = all(e == 0.0 for e in errors)
    return ConvergenceStudy(tuple(n_list), tuple(taus), tuple(errors), tuple(rates), exact)
