"""Named spatial profiles and time weights used by configs.

Spatial profiles (scaled to (0, length)):
``zero``, ``const:<c>``, ``cospix`` = cos(pi x / length),
``sinpix`` = sin(pi x / length), ``bump`` = (1 - r^2)^2 on |r| < 1 with
r = 4 (x/length - 1/2), zero elsewhere.  Used for y0, f (constant in time)
and y_T.

Time weights for the control norm: ``one``, ``t``, ``endpoint`` =
1 / sqrt(t (T - t)) (blows up at both ends; only evaluated at midpoints).
"""
from __future__ import annotations

import numpy as np

from .grid import GridFunction, SpatialGrid

PROFILE_NAMES = ("zero", "const:<c>", "cospix", "sinpix", "bump")
WEIGHT_NAMES = ("one", "t", "endpoint")


def _bump(r):
    return np.where(np.abs(r) < 1.0, (1.0 - r * r) ** 2, 0.0)


def profile(name: str, grid: SpatialGrid) -> GridFunction:
    key, _, arg = name.strip().partition(":")
    xi = grid.nodes / grid.length
    if key == "zero" and not arg:
        return grid.zeros()
    if key == "const" and arg:
        return grid.constant(float(arg))
    if key == "cospix" and not arg:
        return GridFunction(grid, np.cos(np.pi * xi))
    if key == "sinpix" and not arg:
        return GridFunction(grid, np.sin(np.pi * xi))
    if key == "bump" and not arg:
        return GridFunction(grid, _bump(4.0 * (xi - 0.5)))
    raise KeyError(f"unknown profile {name!r}; choose from {', '.join(PROFILE_NAMES)}")


def constant_forcing(u: GridFunction):
    """Time-independent forcing t -> u."""
    vals = u.values

    def f(t):
        return vals

    return f


def weight(name: str, T: float):
    key = name.strip()
    if key == "one":
        return lambda t: 1.0
    if key == "t":
        return lambda t: float(t)
    if key == "endpoint":
        return lambda t: 1.0 / np.sqrt(t * (T - t))
    raise KeyError(f"unknown weight {name!r}; choose from {', '.join(WEIGHT_NAMES)}")
