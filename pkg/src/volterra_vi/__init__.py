"""Evolution variational inequalities with Volterra memory and their optimal control.

Implicit (resolvent) time stepping for

    y' + dPhi(y) + B(y) = f + Cu,   y(0) = y0,

with Phi a p-energy plus the indicator of a nodewise convex set on a uniform
1-D grid, B a history-dependent operator, and projected-gradient minimization
of J(u) = G(y(u)) + mu ||u||_U^2 over a box of admissible controls.
"""
from .control import (AdmissibleBox, Control, ControlProblem, DistributedTracking,
                      IdentityControl, OptOptions, OptResult, SmoothingControl,
                      TerminalTracking, apply_C, control_inner, control_norm,
                      evaluate_cost, optimize, project_admissible)
from .convex import (ConstraintSet, EnergyFunctional, ProxResult, phi_value,
                     project_set, prox_residual, prox_step, subgradient_check)
from .errors import (DiscretizationError, GridMismatchError, InfeasibleError,
                     MemoryEvaluationError, OptimizationError, OracleBudgetError,
                     ProxConvergenceError, StateSolveError)
from .grid import GridFunction, SpatialGrid, h_inner, h_norm, make_grid, v_norm
from .memory import (ComposedMemory, History, KernelMemory, MemoryOperator, ZeroMemory,
                     builtin_kernel, composed_apply, kernel_apply, lipschitz_bound_check)
from .state import (ConvergenceStudy, EstimateReport, StateSetup, StateTrajectory,
                    convergence_order, energy_estimate_report, inclusion_residual_check,
                    solve_state, vi_residual_check)

__all__ = [
    "AdmissibleBox",
    "Control",
    "ControlProblem",
    "DistributedTracking",
    "IdentityControl",
    "OptOptions",
    "OptResult",
    "SmoothingControl",
    "TerminalTracking",
    "apply_C",
    "control_inner",
    "control_norm",
    "evaluate_cost",
    "optimize",
    "project_admissible",
    "ConstraintSet",
    "EnergyFunctional",
    "ProxResult",
    "phi_value",
    "project_set",
    "prox_residual",
    "prox_step",
    "subgradient_check",
    "DiscretizationError",
    "GridMismatchError",
    "InfeasibleError",
    "MemoryEvaluationError",
    "OptimizationError",
    "OracleBudgetError",
    "ProxConvergenceError",
    "StateSolveError",
    "GridFunction",
    "SpatialGrid",
    "h_inner",
    "h_norm",
    "make_grid",
    "v_norm",
    "ComposedMemory",
    "History",
    "KernelMemory",
    "MemoryOperator",
    "ZeroMemory",
    "builtin_kernel",
    "composed_apply",
    "kernel_apply",
    "lipschitz_bound_check",
    "ConvergenceStudy",
    "EstimateReport",
    "StateSetup",
    "StateTrajectory",
    "convergence_order",
    "energy_estimate_report",
    "inclusion_residual_check",
    "solve_state",
    "vi_residual_check",
]

__version__ = "0.1.0"
