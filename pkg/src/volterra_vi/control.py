"""Controls, the cost J(u) = G(y(u)) + mu ||u||_U^2 and its projected-gradient minimizer.

Controls are piecewise constant in time on M equal intervals of (0, T) and
nodal in space (H* is identified with H).  The weighted norm is

    ||u||_U^2 = sum_m omega(t_mid,m) * dt * |u_m|_H^2,

with omega evaluated at interval midpoints only.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DiscretizationError, GridMismatchError, OptimizationError, StateSolveError
from .grid import GridFunction, SpatialGrid, make_grid
from .state import StateSetup, StateTrajectory, solve_state

__all__ = [
    "Control",
    "AdmissibleBox",
    "IdentityControl",
    "SmoothingControl",
    "TerminalTracking",
    "DistributedTracking",
    "ControlProblem",
    "OptOptions",
    "OptResult",
    "control_norm",
    "control_inner",
    "apply_C",
    "project_admissible",
    "evaluate_cost",
    "optimize",
    "write_control",
    "read_control",
]


@dataclass(frozen=True)
class Control:
    """``values[m]`` is the nodal profile on the m-th time interval."""

    grid: SpatialGrid
    T: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] != self.grid.n_nodes:
            raise GridMismatchError(f"control values must have shape (M, {self.grid.n_nodes})")
        if not np.all(np.isfinite(vals)):
            raise ValueError("control values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid, T, n_intervals, c=0.0):
        return cls(grid, T, np.full((n_intervals, grid.n_nodes), float(c)))

    @property
    def n_intervals(self):
        return self.values.shape[0]

    @property
    def dt(self):
        return self.T / self.n_intervals

    @property
    def midpoints(self):
        return (np.arange(self.n_intervals) + 0.5) * self.dt

    def interval_index(self, t):
        """Interval (m dt, (m+1) dt] containing t; t = 0 maps to the first."""
        m = math.ceil(t / self.dt - 1e-9) - 1
        return min(max(m, 0), self.n_intervals - 1)

    def with_values(self, values):
        return Control(self.grid, self.T, values)


def _weight_vector(u: Control, omega):
    wts = np.array([float(omega(t)) for t in u.midpoints])
    if not np.all(np.isfinite(wts) & (wts > 0)):
        raise ValueError("control weight omega must be positive at every interval midpoint")
    return wts * u.dt


def control_inner(u: Control, v: Control, omega) -> float:
    if u.grid != v.grid or u.values.shape != v.values.shape:
        raise GridMismatchError("controls on different meshes")
    return float(_weight_vector(u, omega) @ ((u.values * v.values) @ u.grid.weights))


def control_norm(u: Control, omega) -> float:
    return math.sqrt(max(control_inner(u, u, omega), 0.0))


@dataclass(frozen=True)
class AdmissibleBox:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError("admissible box needs lower <= upper")

    @property
    def singleton(self):
        return self.lower == self.upper


def project_admissible(box: AdmissibleBox, u: Control) -> Control:
    return u.with_values(np.clip(u.values, box.lower, box.upper))


class IdentityControl:
    def apply_values(self, values):
        return values

    def __repr__(self):
        return "IdentityControl()"


@dataclass(frozen=True)
class SmoothingControl:
    """Spatial moving average over nodes i-radius..i+radius, divided by the
    number of nodes actually inside the grid."""

    radius: int

    def __post_init__(self):
        if int(self.radius) != self.radius or self.radius < 0:
            raise ValueError("smoothing radius must be a nonnegative integer")

    def apply_values(self, values):
        values = np.asarray(values, dtype=float)
        n = values.shape[-1]
        r = int(self.radius)
        csum = np.concatenate([np.zeros(values.shape[:-1] + (1,)), np.cumsum(values, axis=-1)], axis=-1)
        idx = np.arange(n)
        lo = np.maximum(idx - r, 0)
        hi = np.minimum(idx + r, n - 1) + 1
        return (csum[..., hi] - csum[..., lo]) / (hi - lo)


@dataclass(frozen=True)
class TerminalTracking:
    """G(y) = |y(T) - y_T|_H^2."""

    target: GridFunction

    def __call__(self, traj: StateTrajectory) -> float:
        d = traj.states[-1] - self.target.values
        return float(traj.grid.weights @ (d * d))


@dataclass(frozen=True)
class DistributedTracking:
    """G(y) = sum_k tau |y^k - y_d(t_k)|_H^2 over k = 1..N (right-endpoint rule).

    Extra cost variant; ``y_d(t)`` returns nodal values.
    """

    y_d: Callable

    def __call__(self, traj: StateTrajectory) -> float:
        w = traj.grid.weights
        total = 0.0
        for t, y in zip(traj.times[1:], traj.states[1:]):
            d = y - np.asarray(self.y_d(t), dtype=float)
            total += traj.tau * float(w @ (d * d))
        return total


def _unit_weight(t):
    return 1.0


@dataclass(frozen=True)
class ControlProblem:
    """Bundle for min_{u in box} G(y(u)) + mu ||u||_U^2.

    ``tracking`` defaults to :class:`TerminalTracking` of ``y_target``; any
    callable of a trajectory that is bounded below can be substituted (its
    lower semicontinuity is assumed, not checked).
    """

    setup: StateSetup
    n_intervals: int
    mu: float
    y_target: GridFunction
    box: AdmissibleBox
    control_op: object = field(default_factory=IdentityControl)
    omega: Callable = _unit_weight
    tracking: Callable | None = None

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"mu must be positive, got {self.mu}")
        if int(self.n_intervals) != self.n_intervals or self.n_intervals < 1:
            raise DiscretizationError("n_intervals must be a positive integer")
        if self.setup.n_steps % self.n_intervals:
            raise DiscretizationError("n_steps must be divisible by n_intervals")
        if self.y_target.grid != self.setup.grid:
            raise GridMismatchError("y_target lives on a different grid")
        _weight_vector(self.zero_control(), self.omega)
        if self.tracking is None:
            object.__setattr__(self, "tracking", TerminalTracking(self.y_target))

    def zero_control(self) -> Control:
        return Control.constant(self.setup.grid, self.setup.T, self.n_intervals)


def apply_C(problem: ControlProblem, u: Control):
    """The forcing t -> (Cu)(t) as nodal values."""
    cu = np.asarray(problem.control_op.apply_values(u.values), dtype=float)

    def forcing(t):
        return cu[u.interval_index(t)]

    return forcing


def evaluate_cost(problem: ControlProblem, u: Control):
    """Returns ``(J, trajectory)`` with J = G(y(u)) + mu ||u||_U^2."""
    traj = solve_state(problem.setup, apply_C(problem, u))
    J = problem.tracking(traj) + problem.mu * control_norm(u, problem.omega) ** 2
    return float(J), traj


@dataclass(frozen=True)
class OptOptions:
    max_iters: int = 200
    fd_step: float = 1e-6
    grad_tol: float = 1e-6
    seed: int = 0
    initial: str = "zero"
    armijo: float = 1e-4
    max_backtracks: int = 40

    def __post_init__(self):
        if self.max_iters < 0 or not self.fd_step > 0 or not self.grad_tol > 0:
            raise ValueError("optimizer options must be positive")
        if self.initial not in ("zero", "random"):
            raise ValueError("initial must be 'zero' or 'random'")


@dataclass(frozen=True)
class LogEntry:
    iteration: int
    J: float
    pg_norm: float
    armijo_steps: int
    u_norm: float


@dataclass(frozen=True)
class OptResult:
    u_star: Control
    J_star: float
    descent_log: tuple
    state_star: StateTrajectory
    iterates: tuple
    reason: str


def _fd_gradient(problem, u: Control, G0, fd_step):
    """U-Riesz gradient of J at ``u``.

    The tracking part G(y(u)) is differenced forward in each nodal
    coordinate (step fd_step * (1 + |u_i|)) and the partials are divided by
    omega_m dt W_i; the quadratic term contributes its exact gradient 2 mu u.
    """
    base = u.values
    grad = np.empty_like(base)
    for m in range(base.shape[0]):
        for i in range(base.shape[1]):
            h = fd_step * (1.0 + abs(base[m, i]))
            pert = base.copy()
            pert[m, i] += h
            traj = solve_state(problem.setup, apply_C(problem, u.with_values(pert)))
            grad[m, i] = (problem.tracking(traj) - G0) / h
    wvec = _weight_vector(u, problem.omega)
    return grad / np.outer(wvec, u.grid.weights) + 2.0 * problem.mu * base


def optimize(problem: ControlProblem, opts: OptOptions = OptOptions()) -> OptResult:
    """Projected gradient on the admissible box with Armijo backtracking along
    the projection arc; trial steps come from the Barzilai-Borwein formula.

    Stops when ||u - P(u - grad J)||_U <= grad_tol, after ``max_iters``
    descent steps, or when the line search cannot make progress.
    """
    box, omega = problem.box, problem.omega
    if opts.initial == "random":
        rng = np.random.default_rng(opts.seed)
        lo = max(box.lower, -1.0)
        hi = min(box.upper, 1.0)
        u0 = problem.zero_control().with_values(
            rng.uniform(lo, hi, problem.zero_control().values.shape) if lo < hi
            else np.full(problem.zero_control().values.shape, lo))
    else:
        u0 = problem.zero_control()
    u = project_admissible(box, u0)

    def cost(v):
        try:
            return evaluate_cost(problem, v)
        except StateSolveError as exc:
            raise OptimizationError(f"state solve failed during optimization: {exc}", iterate=v) from exc

    J, traj = cost(u)
    log, iterates = [], [u]
    step = 1.0
    prev = None
    steps_taken = 0
    reason = "max_iters"
    for k in range(opts.max_iters + 1):
        if box.singleton:
            grad = np.zeros_like(u.values)
        else:
            try:
                grad = _fd_gradient(problem, u, problem.tracking(traj), opts.fd_step)
            except StateSolveError as exc:
                raise OptimizationError(f"state solve failed in gradient: {exc}", iterate=u) from exc
        pg = u.values - np.clip(u.values - grad, box.lower, box.upper)
        pg_norm = control_norm(u.with_values(pg), omega)
        log.append(LogEntry(k, J, pg_norm, steps_taken, control_norm(u, omega)))
        if pg_norm <= opts.grad_tol:
            reason = "converged"
            break
        if k == opts.max_iters:
            break
        if prev is not None:
            du = u.values - prev[0]
            dg = grad - prev[1]
            num = control_inner(u.with_values(du), u.with_values(du), omega)
            den = control_inner(u.with_values(du), u.with_values(dg), omega)
            if den > 0 and num > 0:
                step = min(max(num / den, 1e-10), 1e10)
        accepted = False
        s = step
        for bt in range(opts.max_backtracks + 1):
            cand = u.with_values(np.clip(u.values - s * grad, box.lower, box.upper))
            J_new, traj_new = cost(cand)
            decrease = control_inner(u.with_values(grad), u.with_values(cand.values - u.values), omega)
            if J_new <= J + opts.armijo * decrease and J_new <= J:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            reason = "line_search"
            break
        prev = (u.values, grad)
        steps_taken = bt
        step = s
        u, J, traj = cand, J_new, traj_new
        iterates.append(u)
    return OptResult(u, J, tuple(log), traj, tuple(iterates), reason)


def write_control(path, u: Control):
    """CSV rows ``interval_index,x,value`` with 17 significant digits."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["interval_index", "x", "value"])
        for m in range(u.n_intervals):
            for x, val in zip(u.grid.nodes, u.values[m]):
                w.writerow([m, f"{x:.17g}", f"{val:.17g}"])


def read_control(path, T: float) -> Control:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    idx = np.array([int(r["interval_index"]) for r in rows])
    xs = np.array([float(r["x"]) for r in rows])
    vals = np.array([float(r["value"]) for r in rows])
    n_int = int(idx.max()) + 1
    n_nodes = len(rows) // n_int
    if n_nodes * n_int != len(rows):
        raise DiscretizationError("control CSV is not a full interval x node table")
    grid = make_grid(n_nodes - 1, float(xs[n_nodes - 1]))
    order = np.lexsort((xs, idx))
    return Control(grid, T, vals[order].reshape(n_int, n_nodes))
