"""Run orchestration: target construction, solves, optimization, reports.

Every stage emits plot-ready CSV data; binary density dumps carry the
full final snapshots. All outputs are deterministic for a fixed
scenario and seed.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adjoint import adjoint_gradient, gradient_check, objective, time_weights
from .errors import SolverError
from .fpsolver import DensityField, build_fp_stepper, mean_state, solve_forward
from .grid import Grid4D
from .io_utils import format_float, write_csv, write_density
from .model import ControlSchedule, ScalingConstants, State
from .ode import Trajectory, integrate
from .pncg import pncg
from .scenario import Scenario
from .sde import marginal_histogram, sample_gaussian_in_box, simulate_paths
from .target import TargetDensity, build_target, gaussian_on_grid

log = logging.getLogger(__name__)

__all__ = ["RunReport", "run_pipeline", "run_forward", "run_oracle",
           "run_gradcheck", "run_target", "dimensionalize_controls",
           "FpControlProblem"]


def dimensionalize_controls(u: ControlSchedule, k: ScalingConstants,
                            chemo_scale: float, il2_scale: float):
    """Convert solver dose units back to mg/day and IU IL-2/l/day.

    The unit scales live in the scenario because the model's dose
    coefficients absorb the unit conversions; 0.072 solver units of
    immunotherapy correspond to 7.2e5 IU/l/day at the default scale.
    """
    return u.u1 * chemo_scale, u.u2 * il2_scale


@dataclass
class RunReport:
    """Summary of one optimization pipeline run."""

    scenario: str
    seed: int
    final_objective: float
    initial_objective: float
    iterations: int
    converged: bool
    line_search_failed: bool
    mass_deviation_untreated: float
    mass_deviation_treated: float
    min_density_untreated: float
    min_density_treated: float
    stability_envelope_exceeded: bool
    total_doxorubicin_mg: float
    peak_il2_iu_per_l: float
    mean_tumor_untreated_start: float
    mean_tumor_untreated_end: float
    mean_tumor_treated_start: float
    mean_tumor_treated_end: float
    outputs: dict

    def to_json(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


class FpControlProblem:
    """Objective/gradient bundle the optimizer consumes.

    Each gradient call runs one forward solve and one fused backward
    sweep; objectives reuse a tiny forward cache keyed by the schedule's
    bytes so the Armijo loop does not recompute accepted iterates.
    """

    def __init__(self, f0, fstar: TargetDensity, q, grid: Grid4D, disp,
                 alpha: float, nu1: float, nu2: float, store_every: int = 1):
        self.f0 = f0
        self.fstar = fstar
        self.q = q
        self.grid = grid
        self.disp = disp
        self.alpha = alpha
        self.nu1 = nu1
        self.nu2 = nu2
        self.store_every = store_every
        self.stepper = build_fp_stepper(grid, q, disp)
        self._cache_key = None
        self._cache_field = None
        self.n_forward_solves = 0

    def _field(self, u: ControlSchedule) -> DensityField:
        key = (u.u1.tobytes(), u.u2.tobytes())
        if key != self._cache_key:
            field, _ = solve_forward(self.f0, u, self.q, self.grid, disp=self.disp,
                                     store_every=self.store_every, stepper=self.stepper)
            self.n_forward_solves += 1
            self._cache_key, self._cache_field = key, field
        return self._cache_field

    def objective(self, u: ControlSchedule) -> float:
        return objective(self._field(u), self.fstar, u, self.alpha, self.nu1, self.nu2)

    def gradient(self, u: ControlSchedule):
        return adjoint_gradient(self._field(u), self.fstar, u, self.q, self.alpha,
                                self.nu1, self.nu2, disp=self.disp, stepper=self.stepper)


def _target_for(scenario: Scenario, grid: Grid4D, t_grid: np.ndarray) -> tuple[Trajectory, TargetDensity]:
    q_target = scenario.nondim_target()
    ode_steps = max(1000, 10 * (t_grid.size - 1))
    traj = integrate(scenario.initial_state, None, q_target, scenario.t_final, ode_steps)
    fstar = build_target(traj, scenario.n_anchors, scenario.target_variance, grid, t_grid)
    return traj, fstar


def _mean_series(field: DensityField, grid: Grid4D):
    rows = []
    for m in range(field.n_steps + 1):
        rows.append([field.times[m], *mean_state(field.snapshot(m), grid, mass_tol=1e-5)])
    return np.array(rows)


def _diag_rows(field: DensityField, diag):
    return np.column_stack([field.times, diag.mass, diag.min_value, diag.l2_norm])


def run_pipeline(scenario: Scenario, out_dir, seed: int | None = None,
                 full_scale: bool = False, checkpoint_every: int = 1) -> RunReport:
    """Full optimization pipeline; emits all CSV artifacts into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = scenario.seed if seed is None else seed
    grid = scenario.grid(full_scale)
    t_grid = scenario.time_grid(full_scale)
    n_steps = t_grid.size - 1
    q = scenario.nondim()
    disp = scenario.dispersion

    log.info("stage: target construction")
    traj, fstar = _target_for(scenario, grid, t_grid)
    f0 = gaussian_on_grid(grid, scenario.initial_state.as_array(), scenario.target_variance)

    log.info("stage: untreated forward solve")
    u_zero = ControlSchedule.zeros(scenario.t_final, n_steps, scenario.d1, scenario.d2)
    try:
        field_untr, diag_untr = solve_forward(f0, u_zero, q, grid, disp=disp,
                                              store_every=checkpoint_every)
    except SolverError as exc:
        raise SolverError(f"untreated forward solve failed: {exc}") from exc

    log.info("stage: optimization")
    problem = FpControlProblem(f0, fstar, q, grid, disp, scenario.alpha,
                               scenario.nu1, scenario.nu2, store_every=checkpoint_every)
    u_star, trace = pncg(u_zero, problem, scenario.optimizer)

    log.info("stage: treated forward solve")
    try:
        field_tr, diag_tr = solve_forward(f0, u_star, q, grid, disp=disp,
                                          store_every=checkpoint_every)
    except SolverError as exc:
        raise SolverError(f"treated forward solve failed: {exc}") from exc

    mean_untr = _mean_series(field_untr, grid)
    mean_tr = _mean_series(field_tr, grid)
    u1_dim, u2_dim = dimensionalize_controls(u_star, scenario.scaling,
                                             scenario.chemo_scale, scenario.il2_scale)
    wt = time_weights(u_star.times)
    total_dox = float(np.sum(wt * u1_dim))
    peak_il2 = float(np.max(u2_dim))

    outputs = {}

    def emit(name, header, rows):
        write_csv(out / name, header, rows)
        outputs[name.removesuffix(".csv")] = name

    emit("mean_untreated.csv", ["t", "T", "N", "L", "C"], mean_untr)
    emit("mean_treated.csv", ["t", "T", "N", "L", "C"], mean_tr)
    emit("diagnostics_untreated.csv", ["t", "mass", "min_f", "l2_norm"],
         _diag_rows(field_untr, diag_untr))
    emit("diagnostics_treated.csv", ["t", "mass", "min_f", "l2_norm"],
         _diag_rows(field_tr, diag_tr))
    emit("dosage.csv", ["t", "u1", "u2", "u1_mg_per_day", "u2_iu_per_l_per_day"],
         np.column_stack([u_star.times, u_star.u1, u_star.u2, u1_dim, u2_dim]))
    emit("trace.csv", ["k", "J", "grad_norm", "step_length", "beta", "active_bounds"],
         np.column_stack([
             np.arange(len(trace.objective), dtype=float),
             trace.objective, trace.gradient_norm, trace.step_length,
             trace.beta, np.asarray(trace.active_bounds, dtype=float),
         ]))
    emit("target_trajectory.csv", ["t", "T", "N", "L", "C"],
         np.column_stack([traj.times, traj.states]))

    report = RunReport(
        scenario=scenario.name,
        seed=seed,
        final_objective=float(trace.objective[-1]),
        initial_objective=float(trace.objective[0]),
        iterations=trace.iterations,
        converged=trace.converged,
        line_search_failed=trace.line_search_failed,
        mass_deviation_untreated=diag_untr.max_mass_deviation,
        mass_deviation_treated=diag_tr.max_mass_deviation,
        min_density_untreated=diag_untr.min_over_run,
        min_density_treated=diag_tr.min_over_run,
        stability_envelope_exceeded=bool(diag_untr.envelope_exceeded
                                         or diag_tr.envelope_exceeded),
        total_doxorubicin_mg=total_dox,
        peak_il2_iu_per_l=peak_il2,
        mean_tumor_untreated_start=float(mean_untr[0, 1]),
        mean_tumor_untreated_end=float(mean_untr[-1, 1]),
        mean_tumor_treated_start=float(mean_tr[0, 1]),
        mean_tumor_treated_end=float(mean_tr[-1, 1]),
        outputs=outputs,
    )
    report.to_json(out / "report.json")
    return report


def run_forward(scenario: Scenario, out_dir, seed: int | None = None,
                full_scale: bool = False, checkpoint_every: int = 1) -> dict:
    """Untreated forward solve only; emits means, diagnostics, snapshot."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = scenario.grid(full_scale)
    t_grid = scenario.time_grid(full_scale)
    q = scenario.nondim()
    f0 = gaussian_on_grid(grid, scenario.initial_state.as_array(), scenario.target_variance)
    u_zero = ControlSchedule.zeros(scenario.t_final, t_grid.size - 1, scenario.d1, scenario.d2)
    field, diag = solve_forward(f0, u_zero, q, grid, disp=scenario.dispersion,
                                store_every=checkpoint_every)
    mean = _mean_series(field, grid)
    write_csv(out / "mean_untreated.csv", ["t", "T", "N", "L", "C"], mean)
    write_csv(out / "diagnostics_untreated.csv", ["t", "mass", "min_f", "l2_norm"],
              _diag_rows(field, diag))
    final = field.snapshot(field.n_steps)
    write_density(out / "density_final.bin", final, grid, field.n_steps,
                  float(field.times[-1]))
    for axis in range(4):
        rows = np.column_stack([grid.axis(axis), grid.marginal(final, axis)])
        write_csv(out / f"marginal_final_axis{axis}.csv", ["x", "density"], rows)
    return {
        "max_mass_deviation": diag.max_mass_deviation,
        "min_density": diag.min_over_run,
    }


def run_oracle(scenario: Scenario, out_dir, seed: int | None = None,
               full_scale: bool = False, checkpoint_every: int = 1) -> dict:
    """Density solver vs Monte Carlo marginal comparison (no treatment)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = scenario.seed if seed is None else seed
    grid = scenario.grid(full_scale)
    t_grid = scenario.time_grid(full_scale)
    n_steps = t_grid.size - 1
    q = scenario.nondim()
    disp = scenario.dispersion
    x0 = scenario.initial_state.as_array()
    var = scenario.target_variance

    f0 = gaussian_on_grid(grid, x0, var)
    u_zero = ControlSchedule.zeros(scenario.t_final, n_steps, scenario.d1, scenario.d2)
    field, _ = solve_forward(f0, u_zero, q, grid, disp=disp, store_every=checkpoint_every)

    t_half = scenario.t_final / 2.0
    ens = simulate_paths(
        lambda rng: sample_gaussian_in_box(x0, var, grid.lo, grid.hi,
                                           scenario.sde_paths, rng),
        None, q, scenario.sde_paths, scenario.sde_steps, seed=seed,
        t_end=scenario.t_final, lo=grid.lo, hi=grid.hi, disp=disp,
        observe_at=np.array([0.0, t_half, scenario.t_final]),
    )
    write_csv(out / "ensemble_summary.csv",
              ["t", "mean_T", "mean_N", "mean_L", "mean_C",
               "var_T", "var_N", "var_L", "var_C", "n_paths", "seed"],
              ens.summary_rows())

    rows = []
    worst = 0.0
    for t_idx, m in ((1, n_steps // 2), (2, n_steps)):
        snap = field.snapshot(m)
        for axis in range(4):
            fp_marg = grid.marginal(snap, axis)
            mc_marg = marginal_histogram(ens, t_idx, axis, grid.axis(axis))
            l1 = float(np.sum(grid.axis_weights(axis) * np.abs(fp_marg - mc_marg)))
            worst = max(worst, l1)
            rows.append([ens.times[t_idx], float(axis), l1])
    write_csv(out / "oracle_l1.csv", ["t", "axis", "l1_distance"], rows)
    return {"worst_l1": worst, "rows": rows}


def run_gradcheck(scenario: Scenario, out_dir, seed: int | None = None,
                  full_scale: bool = False, checkpoint_every: int = 1) -> dict:
    """Finite-difference audit of the adjoint gradient; writes a report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = scenario.seed if seed is None else seed
    grid = scenario.grid(full_scale)
    t_grid = scenario.time_grid(full_scale)
    n_steps = t_grid.size - 1
    q = scenario.nondim()
    disp = scenario.dispersion

    _, fstar = _target_for(scenario, grid, t_grid)
    f0 = gaussian_on_grid(grid, scenario.initial_state.as_array(), scenario.target_variance)
    problem = FpControlProblem(f0, fstar, q, grid, disp, scenario.alpha,
                               scenario.nu1, scenario.nu2, store_every=checkpoint_every)

    rng = np.random.default_rng(seed)
    u = ControlSchedule(
        t_grid,
        rng.uniform(0.25 * scenario.d1, 0.75 * scenario.d1, n_steps + 1),
        rng.uniform(0.25 * scenario.d2, 0.75 * scenario.d2, n_steps + 1),
        scenario.d1, scenario.d2,
    )
    g = problem.gradient(u)
    rows, worst = gradient_check(problem.objective, g, u, n_directions=5,
                                 eps=1e-4, seed=seed)
    lines = ["adjoint gradient vs central finite differences", ""]
    for r in rows:
        lines.append(
            f"direction {r['direction']}: adjoint {format_float(r['adjoint'])}  "
            f"fd {format_float(r['finite_difference'])}  "
            f"rel_err {r['relative_error']:.3e}"
        )
    lines.append("")
    lines.append(f"worst relative error: {worst:.3e}")
    (out / "gradcheck.txt").write_text("\n".join(lines) + "\n")
    return {"worst_relative_error": worst, "rows": rows}


def run_target(scenario: Scenario, out_dir, seed: int | None = None,
               full_scale: bool = False, checkpoint_every: int = 1) -> dict:
    """Emit the target trajectory and per-axis target marginals."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = scenario.grid(full_scale)
    t_grid = scenario.time_grid(full_scale)
    traj, fstar = _target_for(scenario, grid, t_grid)
    write_csv(out / "target_trajectory.csv", ["t", "T", "N", "L", "C"],
              np.column_stack([traj.times, traj.states]))
    for axis in range(4):
        rows = []
        for m in range(fstar.n_steps + 1):
            marg = grid.marginal(fstar.snapshot(m), axis)
            for xv, dv in zip(grid.axis(axis), marg):
                rows.append([t_grid[m], xv, dv])
        write_csv(out / f"target_marginal_axis{axis}.csv", ["t", "x", "density"], rows)
    masses = [grid.integrate(fstar.snapshot(m)) for m in range(fstar.n_steps + 1)]
    return {"max_mass_error": float(np.max(np.abs(np.array(masses) - 1.0)))}
