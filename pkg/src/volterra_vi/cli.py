"""Batch front end.

    volterra-vi --config run.json [--out DIR] [--seed N] [--quiet]

The config is a flat JSON object; ``command`` is one of solve-state,
optimize, check-estimates, convergence.  Exit status: 0 success,
2 invalid config, 3 solver failure.  Artifacts are written to a temporary
directory and moved into ``--out`` only when the command succeeds.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import shutil
import sys
import tempfile
from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import catalog
from .control import (AdmissibleBox, ControlProblem, IdentityControl, OptOptions,
                      SmoothingControl, optimize, write_control)
from .convex import ConstraintSet, EnergyFunctional
from .errors import OptimizationError, ProxConvergenceError, StateSolveError
from .export import write_diagnostics, write_rows, write_trajectory
from .grid import make_grid
from .memory import builtin_kernel
from .state import (StateSetup, convergence_order, energy_estimate_report,
                    inclusion_residual_check, solve_state, vi_residual_check)

log = logging.getLogger("volterra_vi")

COMMANDS = ("solve-state", "optimize", "check-estimates", "convergence")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    p: float = 2.0
    set: str = "full"
    kernel: str = "zero"
    n_cells: int = 64
    length: float = 1.0
    n_steps: int = 256
    T: float = 1.0
    prox_tol: float = 1e-9
    y0: str = "zero"
    f: str = "zero"
    y_target: str = "zero"
    mu: float = 0.1
    box: tuple = (-1.0, 1.0)
    omega: str = "one"
    control_op: str = "identity"
    n_intervals: int = 4
    max_iters: int = 200
    fd_step: float = 1e-6
    grad_tol: float = 1e-6
    n_steps_list: tuple = ()
    ref_factor: int = 16
    n_test: int = 100
    seed: int = 0
    out: str = "out"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "command" not in data:
            raise ConfigError("config needs a 'command'")
        data = dict(data)
        for key in ("box", "n_steps_list"):
            if key in data:
                data[key] = tuple(data[key])
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {COMMANDS}")
        for name in ("p", "length", "T", "prox_tol", "mu", "fd_step", "grad_tol"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        if self.p < 2:
            raise ConfigError("p must be >= 2")
        for name in ("n_cells", "n_steps", "n_intervals", "ref_factor", "n_test"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.n_cells < 2:
            raise ConfigError("n_cells must be >= 2")
        if not isinstance(self.max_iters, int) or self.max_iters < 0:
            raise ConfigError("max_iters must be a nonnegative integer")
        if len(self.box) != 2 or not self.box[0] <= self.box[1]:
            raise ConfigError("box must be [lower, upper] with lower <= upper")
        if any(not isinstance(n, int) or n < 1 for n in self.n_steps_list):
            raise ConfigError("n_steps_list must hold positive integers")
        if self.command == "convergence" and len(self.n_steps_list) < 3:
            raise ConfigError("convergence needs n_steps_list with at least 3 entries")
        if self.ref_factor < 16 and self.command == "convergence":
            raise ConfigError("ref_factor must be >= 16")
        if self.command == "optimize" and self.n_steps % self.n_intervals:
            raise ConfigError("n_steps must be divisible by n_intervals")


def build_setup(cfg: RunConfig) -> StateSetup:
    try:
        grid = make_grid(cfg.n_cells, cfg.length)
        phi = EnergyFunctional(float(cfg.p), ConstraintSet.parse(cfg.set), grid)
        memory = builtin_kernel(cfg.kernel)
        y0 = catalog.profile(cfg.y0, grid)
        f = catalog.constant_forcing(catalog.profile(cfg.f, grid))
        return StateSetup(phi, memory, f, y0, float(cfg.T), cfg.n_steps, float(cfg.prox_tol))
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def build_problem(cfg: RunConfig, setup: StateSetup) -> ControlProblem:
    try:
        if cfg.control_op == "identity":
            cop = IdentityControl()
        elif cfg.control_op.startswith("smoothing:"):
            cop = SmoothingControl(int(cfg.control_op.split(":", 1)[1]))
        else:
            raise ConfigError(f"unknown control_op {cfg.control_op!r}")
        return ControlProblem(setup, cfg.n_intervals, float(cfg.mu),
                              catalog.profile(cfg.y_target, setup.grid),
                              AdmissibleBox(float(cfg.box[0]), float(cfg.box[1])),
                              cop, catalog.weight(cfg.omega, setup.T))
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _solve_state(cfg, setup, out: Path):
    traj = solve_state(setup)
    write_trajectory(out / "trajectory.csv", traj)
    write_diagnostics(out / "diagnostics.csv", traj, setup, cfg.n_test, cfg.seed)
    return {
        "steps": traj.n_steps,
        "max_prox_iterations": int(traj.iterations.max(initial=0)),
        "vi_min_gap": vi_residual_check(traj, setup, cfg.n_test, cfg.seed),
        "max_subgrad_violation": inclusion_residual_check(traj, setup, seed=cfg.seed),
    }


def _optimize(cfg, setup, out: Path):
    problem = build_problem(cfg, setup)
    opts = OptOptions(cfg.max_iters, cfg.fd_step, cfg.grad_tol, cfg.seed)
    res = optimize(problem, opts)
    write_control(out / "control.csv", res.u_star)
    write_rows(out / "optimizer_log.csv", ["iter", "J", "pg_norm", "armijo_steps"],
               ([e.iteration, e.J, e.pg_norm, e.armijo_steps] for e in res.descent_log))
    write_trajectory(out / "trajectory.csv", res.state_star)
    return {"J_star": res.J_star, "iterations": len(res.descent_log) - 1, "stop": res.reason}


def _check_estimates(cfg, setup, out: Path):
    rows = []
    for n in cfg.n_steps_list or (cfg.n_steps,):
        s = replace(setup, n_steps=n)
        rep = energy_estimate_report(solve_state(s), s)
        rows.append([n, s.tau, rep.lhs, rep.rhs_core, rep.ratio])
    write_rows(out / "estimate_report.csv", ["n_steps", "tau", "lhs", "rhs_core", "ratio"], rows)
    ratios = [r[-1] for r in rows if math.isfinite(r[-1])]
    return {"ratio_min": min(ratios, default=math.nan), "ratio_max": max(ratios, default=math.nan)}


def _convergence(cfg, setup, out: Path):
    study = convergence_order(setup, cfg.n_steps_list, ref_factor=cfg.ref_factor)
    rows = []
    for i, (n, tau, err) in enumerate(zip(study.n_steps, study.taus, study.errors)):
        rows.append([n, tau, err, study.rates[i - 1] if i else ""])
    write_rows(out / "rates.csv", ["n_steps", "tau", "error", "rate"], rows)
    return {"rates": list(study.rates), "exact": study.exact}


HANDLERS = {
    "solve-state": _solve_state,
    "optimize": _optimize,
    "check-estimates": _check_estimates,
    "convergence": _convergence,
}


def run(cfg: RunConfig, out_dir) -> tuple[int, dict]:
    """Execute one command; returns (exit status, summary)."""
    try:
        setup = build_setup(cfg)
        if cfg.command == "optimize":
            build_problem(cfg, setup)
    except ConfigError as exc:
        return EXIT_CONFIG, {"error": str(exc)}
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".vvi-", dir=out_dir.parent))
    try:
        summary = HANDLERS[cfg.command](cfg, setup, tmp)
        out_dir.mkdir(parents=True, exist_ok=True)
        for item in sorted(tmp.iterdir()):
            item.replace(out_dir / item.name)
    except ConfigError as exc:
        return EXIT_CONFIG, {"error": str(exc)}
    except (StateSolveError, OptimizationError, ProxConvergenceError) as exc:
        return EXIT_SOLVER, {"error": str(exc)}
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return EXIT_OK, summary


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="volterra-vi", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="path to a JSON run config")
    ap.add_argument("--out", help="output directory (overrides config 'out')")
    ap.add_argument("--seed", type=int, help="overrides config 'seed'")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s")
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        if args.seed is not None:
            raw["seed"] = args.seed
        cfg = RunConfig.from_dict(raw)
    except (OSError, json.JSONDecodeError, ConfigError, AttributeError, TypeError) as exc:
        log.error("invalid config: %s", exc)
        return EXIT_CONFIG
    status, summary = run(cfg, args.out or cfg.out)
    if status:
        log.error("%s failed (exit %d): %s", cfg.command, status, summary.get("error"))
    else:
        for key, val in summary.items():
            log.info("%s: %s", key, val)
    return status


if __name__ == "__main__":
    sys.exit(main())
