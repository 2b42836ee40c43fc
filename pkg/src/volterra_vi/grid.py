"""Uniform 1-D grid, nodal grid functions and the discrete H/V norms.

Integrals of nodal quantities use the composite trapezoid rule; gradients
are per-cell forward differences.  No boundary condition is imposed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DiscretizationError, GridMismatchError

__all__ = [
    "SpatialGrid",
    "GridFunction",
    "make_grid",
    "h_inner",
    "h_norm",
    "v_norm",
    "write_grid_function",
    "read_grid_function",
]


@dataclass(frozen=True)
class SpatialGrid:
    """The interval (0, length) split into ``n_cells`` equal cells."""

    n_cells: int
    length: float = 1.0

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise DiscretizationError(f"need n_cells >= 2, got {self.n_cells}")
        if not (math.isfinite(self.length) and self.length > 0):
            raise DiscretizationError(f"need length > 0, got {self.length}")

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.n_nodes) * self.h
        x[-1] = self.length
        x.flags.writeable = False
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights; ``weights @ u`` integrates nodal ``u``."""
        w = np.full(self.n_nodes, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.flags.writeable = False
        return w

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n_nodes))

    def constant(self, c: float) -> "GridFunction":
        return GridFunction(self, np.full(self.n_nodes, float(c)))

    def sample(self, fn) -> "GridFunction":
        """Evaluate a vectorized ``fn(x)`` at the nodes."""
        vals = np.broadcast_to(np.asarray(fn(self.nodes), dtype=float), (self.n_nodes,))
        return GridFunction(self, vals)


def make_grid(n_cells: int, length: float = 1.0) -> SpatialGrid:
    return SpatialGrid(int(n_cells), float(length))


class GridFunction:
    """Nodal values of a function on a :class:`SpatialGrid` (read-only)."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: SpatialGrid, values):
        vals = np.array(values, dtype=float)
        if vals.shape != (grid.n_nodes,):
            raise GridMismatchError(
                f"expected {grid.n_nodes} nodal values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.flags.writeable = False
        self.grid = grid
        self.values = vals

    def __repr__(self):
        return f"GridFunction(n_cells={self.grid.n_cells}, values={self.values!r})"

    def __len__(self):
        return self.grid.n_nodes

    def _other(self, other):
        if isinstance(other, GridFunction):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, alpha):
        return GridFunction(self.grid, self.values * float(alpha))

    __rmul__ = __mul__

    def __truediv__(self, alpha):
        return GridFunction(self.grid, self.values / float(alpha))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def allclose(self, other, atol=1e-12, rtol=0.0):
        check_same_grid(self, other)
        return bool(np.allclose(self.values, other.values, atol=atol, rtol=rtol))


def check_same_grid(u: GridFunction, v: GridFunction):
    if u.grid != v.grid:
        raise GridMismatchError(f"grid mismatch: {u.grid} vs {v.grid}")


def h_inner(u: GridFunction, v: GridFunction) -> float:
    """L2(0, length) inner product by the trapezoid rule."""
    check_same_grid(u, v)
    return float(u.grid.weights @ (u.values * v.values))


def h_norm(u: GridFunction) -> float:
    return math.sqrt(max(h_inner(u, u), 0.0))


def v_norm(v: GridFunction, p: float) -> float:
    """Discrete W^{1,p} norm: (sum_cells h|Dv|^p + trapz(|v|^p))^(1/p)."""
    if not p >= 2:
        raise ValueError(f"v_norm needs p >= 2, got {p}")
    grid = v.grid
    # scale first so that large p does not overflow
    scale = np.max(np.abs(v.values))
    if scale == 0.0:
        return 0.0
    u = v.values / scale
    du = np.diff(u) / grid.h
    total = grid.h * np.sum(np.abs(du) ** p) + grid.weights @ (np.abs(u) ** p)
    return float(scale * total ** (1.0 / p))


def write_grid_function(path, u: GridFunction):
    """One row per node, columns ``x,value``, 17 significant digits."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "value"])
        for x, val in zip(u.grid.nodes, u.values):
            w.writerow([f"{x:.17g}", f"{val:.17g}"])


def read_grid_function(path) -> GridFunction:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    xs = np.array([float(r["x"]) for r in rows])
    vals = np.array([float(r["value"]) for r in rows])
    if len(xs) < 3:
        raise DiscretizationError("a grid function needs at least 3 nodes")
    grid = make_grid(len(xs) - 1, xs[-1])
    if not np.allclose(xs, grid.nodes, rtol=0, atol=1e-12 * grid.length):
        raise DiscretizationError("CSV nodes are not uniformly spaced from 0")
    return GridFunction(grid, vals)
