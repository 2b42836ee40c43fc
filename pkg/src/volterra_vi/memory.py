"""Volterra (history-dependent) memory operators.

Two families are provided:

* :class:`KernelMemory`:  B(w)(t) = int_0^t b(t, s) w(s) ds, linear, with
  Lipschitz constant L = sup |b|;
* :class:`ComposedMemory`: B(w)(t) = Bmap(t, int_0^t bmap(t, s, w(s)) ds), with
  L = L1 * L2 when Bmap and bmap are L1- and L2-Lipschitz in their last
  argument and vanish at 0.

Time integrals use the left-rectangle rule over the past mesh points
t_0 < ... < t_{k-1}, so evaluating at t_k never needs the state at t_k.
Callbacks receive and return numpy arrays of nodal values and must be
reentrant.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GridMismatchError, MemoryEvaluationError
from .grid import GridFunction, SpatialGrid

__all__ = [
    "History",
    "MemoryOperator",
    "ZeroMemory",
    "KernelMemory",
    "ComposedMemory",
    "kernel_apply",
    "composed_apply",
    "lipschitz_bound_check",
    "builtin_kernel",
    "KERNEL_NAMES",
]


@dataclass(frozen=True)
class History:
    """Past states ``states[j]`` at ``times[j]``, j = 0..k-1."""

    grid: SpatialGrid
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        states = np.asarray(self.states, dtype=float).reshape(times.size, self.grid.n_nodes)
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("history times must be strictly increasing")
        if not np.all(np.isfinite(states)):
            raise ValueError("history states must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @classmethod
    def from_functions(cls, times, functions):
        functions = list(functions)
        if not functions:
            raise ValueError("use History.empty for an empty history")
        grid = functions[0].grid
        for u in functions:
            if u.grid != grid:
                raise GridMismatchError("history states on different grids")
        return cls(grid, np.asarray(times, dtype=float), np.array([u.values for u in functions]))

    @classmethod
    def empty(cls, grid):
        return cls(grid, np.zeros(0), np.zeros((0, grid.n_nodes)))

    def __len__(self):
        return self.times.size

    def prefix(self, k):
        return History(self.grid, self.times[:k], self.states[:k])


def _step_weights(times, t_k):
    """Left-rectangle widths tau_j = t_{j+1} - t_j with t_{k} closing the mesh."""
    if times.size == 0:
        return times
    if not t_k > times[-1]:
        raise ValueError(f"evaluation time {t_k} must exceed the last history time {times[-1]}")
    return np.diff(np.append(times, t_k))


class MemoryOperator:
    """Base class; subclasses implement :meth:`evaluate` on raw arrays."""

    lipschitz: float = 0.0

    def evaluate(self, times: np.ndarray, states: np.ndarray, t_k: float) -> np.ndarray:
        raise NotImplementedError

    def apply(self, hist: History, t_k: float) -> GridFunction:
        return GridFunction(hist.grid, self.evaluate(hist.times, hist.states, t_k))

    def check_bound(self, T, n_samples=256, seed=0):
        """Return the sampled sup estimate of the declared bound (no-op here)."""
        return self.lipschitz


class ZeroMemory(MemoryOperator):
    lipschitz = 0.0

    def evaluate(self, times, states, t_k):
        return np.zeros(states.shape[-1])

    def __repr__(self):
        return "ZeroMemory()"


@dataclass(frozen=True)
class KernelMemory(MemoryOperator):
    """Kernel operator; ``b(t, s)`` must broadcast over an array ``s``."""

    b: Callable[[float, np.ndarray], np.ndarray]
    lipschitz: float
    name: str = field(default="kernel")

    def __post_init__(self):
        if not (math.isfinite(self.lipschitz) and self.lipschitz >= 0):
            raise ValueError("kernel bound L must be finite and >= 0")

    def kernel_row(self, t_k, s):
        vals = np.broadcast_to(np.asarray(self.b(t_k, s), dtype=float), s.shape)
        if not np.all(np.isfinite(vals)):
            raise MemoryEvaluationError(f"kernel {self.name!r} returned non-finite values at t={t_k}")
        return vals

    def evaluate(self, times, states, t_k):
        if times.size == 0:
            return np.zeros(states.shape[-1])
        weights = _step_weights(times, t_k) * self.kernel_row(t_k, times)
        return weights @ states

    def check_bound(self, T, n_samples=256, seed=0):
        """Sample |b| on 0 <= s < t <= T; warn if it exceeds the declared L."""
        rng = np.random.default_rng(seed)
        t = rng.uniform(0.0, T, n_samples)
        s = rng.uniform(0.0, 1.0, n_samples) * t
        est = max(abs(float(self.kernel_row(ti, np.array([si]))[0])) for ti, si in zip(t, s))
        if est > self.lipschitz * (1 + 1e-12) + 1e-15:
            warnings.warn(f"kernel {self.name!r}: sampled sup|b| = {est:.6g} exceeds declared "
                          f"L = {self.lipschitz:.6g}", RuntimeWarning, stacklevel=2)
        return est

    def __repr__(self):
        return f"KernelMemory(name={self.name!r}, L={self.lipschitz})"


@dataclass(frozen=True)
class ComposedMemory(MemoryOperator):
    """Bmap(t, int_0^t bmap(t, s, w(s)) ds) with L = L1 * L2."""

    outer: Callable[[float, np.ndarray], np.ndarray]
    outer_lipschitz: float
    inner: Callable[[float, float, np.ndarray], np.ndarray]
    inner_lipschitz: float

    @property
    def lipschitz(self):
        return self.outer_lipschitz * self.inner_lipschitz

    def evaluate(self, times, states, t_k):
        n = states.shape[-1]
        acc = np.zeros(n)
        for tau_j, s, w in zip(_step_weights(times, t_k), times, states):
            acc += tau_j * np.asarray(self.inner(t_k, s, w), dtype=float)
        out = np.broadcast_to(np.asarray(self.outer(t_k, acc), dtype=float), (n,)).copy()
        if not (np.all(np.isfinite(out)) and np.all(np.isfinite(acc))):
            raise MemoryEvaluationError(f"composed memory returned non-finite values at t={t_k}")
        return out


def kernel_apply(op: KernelMemory, hist: History, t_k: float) -> GridFunction:
    """sum_{j<k} tau_j b(t_k, t_j) hist.states[j], nodewise."""
    return op.apply(hist, t_k)


def composed_apply(op: ComposedMemory, hist: History, t_k: float) -> GridFunction:
    return op.apply(hist, t_k)


def lipschitz_bound_check(op: MemoryOperator, hist1: History, hist2: History) -> float:
    """min over mesh points t_k (k >= 1) of L*sum_{j<k} tau_j|w1_j - w2_j|_H - |B(w1)(t_k) - B(w2)(t_k)|_H.

    Each point uses the history prefix before it.  Returns 0 for
    single-point histories.
    """
    if hist1.grid != hist2.grid:
        raise GridMismatchError("histories live on different grids")
    if hist1.times.shape != hist2.times.shape or not np.array_equal(hist1.times, hist2.times):
        raise GridMismatchError("histories live on different time meshes")
    w = hist1.grid.weights
    times = hist1.times
    diff = hist1.states - hist2.states
    dnorm = np.sqrt(np.maximum((diff * diff) @ w, 0.0))
    slacks = []
    for k in range(1, times.size):
        tk = times[k]
        bound = op.lipschitz * float(_step_weights(times[:k], tk) @ dnorm[:k])
        db = op.evaluate(times[:k], hist1.states[:k], tk) - op.evaluate(times[:k], hist2.states[:k], tk)
        slacks.append(bound - math.sqrt(max(float(w @ (db * db)), 0.0)))
    return min(slacks, default=0.0)


KERNEL_NAMES = ("zero", "constant:<c>", "exp-decay:<lambda>", "sin-ts")


def builtin_kernel(name: str) -> MemoryOperator:
    """Memory operator from a config name (see ``KERNEL_NAMES``)."""
    key, _, arg = name.strip().partition(":")
    if key == "zero" and not arg:
        return ZeroMemory()
    if key == "constant" and arg:
        c = float(arg)
        return KernelMemory(lambda t, s: np.full(np.shape(s), c), abs(c), name)
    if key == "exp-decay" and arg:
        lam = float(arg)
        if lam < 0:
            raise ValueError("exp-decay rate must be >= 0 (bounded kernel)")
        return KernelMemory(lambda t, s: np.exp(-lam * (t - np.asarray(s))), 1.0, name)
    if key == "sin-ts" and not arg:
        return KernelMemory(lambda t, s: np.sin(t * np.asarray(s)), 1.0, name)
    raise ValueError(f"unknown kernel {name!r}; choose from {', '.join(KERNEL_NAMES)}")
