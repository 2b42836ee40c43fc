"""CSV writers for trajectories, diagnostics and reports (17 significant digits)."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .convex import phi_value
from .state import StateSetup, StateTrajectory, subgradient_violations, vi_gaps

__all__ = ["fmt", "write_rows", "write_trajectory", "write_diagnostics", "read_trajectory_values"]


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_rows(path, header, rows):
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])


def write_trajectory(path, traj: StateTrajectory):
    """Header ``t,x0..xn``; one row per time level."""
    header = ["t"] + [f"x{i}" for i in range(traj.grid.n_nodes)]
    write_rows(path, header, ([t, *y] for t, y in zip(traj.times, traj.states)))


def read_trajectory_values(path):
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    data = np.array([[float(v) for v in r] for r in rows])
    return data[:, 0], data[:, 1:]


def write_diagnostics(path, traj: StateTrajectory, setup: StateSetup, n_test=100, seed=0):
    """Per step k >= 1: step, |y|_H, Phi(y), |y'|_H, vi_gap, subgrad_violation."""
    w = traj.grid.weights
    gaps = vi_gaps(traj, setup, n_test, seed)
    viol = subgradient_violations(traj, setup, seed=seed)
    vel = traj.velocities()
    rows = []
    for k in range(1, traj.n_steps + 1):
        y = traj.states[k]
        rows.append([k, math.sqrt(w @ (y * y)), phi_value(setup.phi, traj.state(k)),
                     math.sqrt(w @ (vel[k - 1] ** 2)), gaps[k - 1], viol[k - 1]])
    write_rows(path, ["step", "y_H", "phi", "dy_H", "vi_gap", "subgrad_violation"], rows)
