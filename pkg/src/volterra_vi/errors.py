"""Exception types raised across the package."""


class DiscretizationError(ValueError):
    """A grid, time mesh or step size that cannot be used."""


class GridMismatchError(ValueError):
    """Two grid functions (or histories) live on different meshes."""


class InfeasibleError(ValueError):
    """A point lies outside the domain of the energy functional."""


class MemoryEvaluationError(ValueError):
    """A memory callback produced non-finite output."""


class ProxConvergenceError(RuntimeError):
    """The proximal inner solver exhausted its iteration budget."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class StateSolveError(RuntimeError):
    """Time stepping failed; ``step`` is the 1-based step index."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class OptimizationError(RuntimeError):
    """State solve failed during optimization; ``iterate`` holds the control."""

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


class OracleBudgetError(RuntimeError):
    """An oracle ran out of its iteration or sample budget."""
