"""Trial orchestration: paired micro/macro co-simulation on one clock.

A trial advances an agent ensemble and a density field side by side under
the same controller, interaction law, disturbance, and time grid. Each
recorded step logs the tracking error of both levels, normalized error
percentages, and total mass, so runs can be compared bitwise across
backends and re-runs.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import bounds as bounds_mod
from . import micro
from ._accel import resolve
from .config import TrialConfig, dump_config
from .control import (ControlGains, control_velocity, macroscopic_control,
                      sample_agent_inputs, solve_flux)
from .errors import ConfigError, NoGuarantee, NumericalFault
from .grid import (GridSpec, ScalarField, constant_field, export_field_csv,
                   integrate, lp_norm, scalar_field, vector_field)
from .kernels import (KdeSpec, KernelSpec, TargetDensitySpec, is_unlimited,
                      kde_density, von_mises_target)
from .macro import (MacroState, interaction_velocity, lax_friedrichs_step,
                    reference_step, velocity_sup)

TIMESERIES_COLUMNS = ("step", "t", "err2_disc", "err2_cont", "ebar_disc",
                      "ebar_cont", "mass_disc", "mass_cont")
AUDIT_COLUMNS = ("step", "t", "cfl", "clipped_cells", "mass_residual",
                 "projections")
_FMT = "%.17g"


@dataclass
class TrialResult:
    """Recorded time series and terminal state of one trial."""

    config: TrialConfig
    t: np.ndarray
    err2_disc: np.ndarray
    err2_cont: np.ndarray
    mass_disc: np.ndarray
    mass_cont: np.ndarray
    cfl: np.ndarray
    clipped_cells: np.ndarray
    mass_residual: np.ndarray
    projections: np.ndarray
    target_final: ScalarField
    density_final: Optional[ScalarField]
    estimate_final: Optional[ScalarField]
    agents_final: Optional[micro.AgentState]
    bounds: Optional[bounds_mod.BoundsReport] = None
    snapshots: dict = field(default_factory=dict)
    trajectory: Optional[np.ndarray] = None

    @property
    def ebar_disc(self) -> np.ndarray:
        return percentage_error(self.err2_disc ** 2)

    @property
    def ebar_cont(self) -> np.ndarray:
        return percentage_error(self.err2_cont ** 2)

    def observed_limsup(self, fraction: float = 0.1) -> float:
        """Max continuum error norm over the trailing fraction of the run."""
        series = self.err2_cont
        if not np.all(np.isfinite(series)):
            return math.nan
        tail = max(1, int(math.ceil(fraction * series.size)))
        return float(np.max(series[-tail:]))


def percentage_error(err_sq: np.ndarray) -> np.ndarray:
    """Squared-error series as a percentage of its own peak (0..100).

    Takes the series of squared L2 error norms of a completed trial and
    normalizes by the peak over the whole series. An all-zero series maps
    to all zeros (0/0 convention, logged).
    """
    err_sq = np.asarray(err_sq, dtype=np.float64)
    peak = np.max(err_sq) if err_sq.size else 0.0
    if not (peak > 0):
        logging.getLogger(__name__).info(
            "percentage_error: all-zero series, returning zeros")
        return np.zeros_like(err_sq)
    return 100.0 * err_sq / peak


def _build_problem(cfg: TrialConfig):
    grid = GridSpec(cfg.d, cfg.cells)
    kernel = KernelSpec(
        strength=cfg.kernel_strength,
        length_scale=cfg.kernel_length_scale,
        sensing_radius=cfg.sensing_radius,
        family=cfg.kernel_family,
    )
    center = (cfg.target_center_x1, cfg.target_center_x2)[: cfg.d]
    target_spec = TargetDensitySpec(
        concentration=cfg.target_concentration, center=center, mass=cfg.mass)
    gains = ControlGains(
        kp=cfg.kp,
        modes=cfg.modes if cfg.modes else None,
        density_floor=cfg.density_floor,
    )
    kde_spec = KdeSpec(bandwidth=cfg.kde_bandwidth, agent_mass=cfg.agent_mass)
    disturbance = micro.DisturbanceSpec(
        amplitude=cfg.disturbance_amplitude, onset=cfg.onset_time)
    return grid, kernel, target_spec, gains, kde_spec, disturbance


def preflight_cfl(cfg: TrialConfig) -> float:
    """Estimate the worst Courant number before running; reject if > 1.

    The estimate evaluates the full transport velocity (interaction +
    control) on the initial continuum state and adds the disturbance
    amplitude as a uniform worst-case contribution.
    """
    grid, kernel, target_spec, gains, _, _ = _build_problem(cfg)
    target = von_mises_target(target_spec, grid)
    rho0 = _initial_density(cfg, grid, target)
    err = scalar_field(grid, target.values - rho0.values)
    v_target = interaction_velocity(target, kernel, truncated=False)
    limited = not is_unlimited(kernel, cfg.d)
    q = macroscopic_control(err, rho0, target, kernel, gains,
                            limited=limited, v_target=v_target)
    sol = solve_flux(q, gains)
    u = control_velocity(sol.w, rho0, gains)
    v = interaction_velocity(rho0, kernel,
                             truncated=cfg.limit_physical_interactions)
    vmax = velocity_sup(v) + velocity_sup(u) + abs(cfg.disturbance_amplitude)
    cfl = cfg.dt * vmax / grid.h
    if cfl > 1.0:
        raise ConfigError(
            f"estimated Courant number {cfl:.3g} exceeds 1; "
            f"reduce dt below {grid.h / vmax:.3g} or lower kp")
    return cfl


def _initial_density(cfg: TrialConfig, grid: GridSpec,
                     target: ScalarField) -> ScalarField:
    if cfg.init_density == "target":
        return target
    return constant_field(grid, cfg.mass / (2.0 * math.pi) ** cfg.d)


def run_trial(cfg: TrialConfig, out_dir=None, backend=None) -> TrialResult:
    """Run one co-simulation trial; optionally write its output files."""
    cfg = cfg.validate()
    preflight_cfl(cfg)
    impl = resolve(backend if backend is not None else cfg.backend)
    grid, kernel, target_spec, gains, kde_spec, disturbance = _build_problem(cfg)
    limited = not is_unlimited(kernel, cfg.d)

    run_disc = cfg.legs in ("both", "discrete")
    run_cont = cfg.legs in ("both", "continuous")

    target_state = MacroState(von_mises_target(target_spec, grid), 0.0)
    evolving = cfg.target_mode == "evolving"
    # Physical interaction field of the target; reused every step when the
    # target is static.
    v_target = interaction_velocity(target_state.rho, kernel, truncated=False)

    agents = None
    if run_disc:
        rng = np.random.default_rng(cfg.seed)
        agents = micro.AgentState(
            micro.initial_positions(cfg.agents, cfg.d, rng, mode=cfg.init), 0.0)
    cont = None
    if run_cont:
        cont = MacroState(_initial_density(cfg, grid, target_state.rho), 0.0)

    steps = cfg.steps
    nan = math.nan
    t_axis = np.arange(steps + 1, dtype=np.float64) * cfg.dt
    err2_disc = np.full(steps + 1, nan)
    err2_cont = np.full(steps + 1, nan)
    mass_disc = np.full(steps + 1, nan)
    mass_cont = np.full(steps + 1, nan)
    cfl_log = np.zeros(steps + 1)
    clip_log = np.zeros(steps + 1)
    residual_log = np.zeros(steps + 1)
    projection_log = np.zeros(steps + 1, dtype=np.int64)

    snapshots = {"target_initial": target_state.rho}
    traj_rows = []

    def control_pipeline(density, step_idx):
        """Density + target -> (error, control source, control velocity)."""
        err = scalar_field(grid, target_state.rho.values - density.values)
        q = macroscopic_control(err, density, target_state.rho, kernel, gains,
                                limited=limited, v_target=v_target)
        sol = solve_flux(q, gains)
        if sol.mean_projected:
            projection_log[step_idx] += 1
        u = control_velocity(sol.w, density, gains)
        return err, q, u

    def record(idx, estimate, density):
        if estimate is not None:
            err2_disc[idx] = lp_norm(
                scalar_field(grid, target_state.rho.values - estimate.values), 2)
            mass_disc[idx] = integrate(estimate)
        if density is not None:
            err2_cont[idx] = lp_norm(
                scalar_field(grid, target_state.rho.values - density.values), 2)
            mass_cont[idx] = integrate(density)

    snap_every = cfg.snapshot_stride
    traj_every = cfg.trajectory_stride

    for s in range(steps + 1):
        t = s * cfg.dt
        estimate = kde_density(agents.positions, kde_spec, grid,
                               backend=impl) if run_disc else None
        record(s, estimate, cont.rho if run_cont else None)
        if snap_every and s % snap_every == 0:
            if estimate is not None:
                snapshots[f"estimate_{s:06d}"] = estimate
            if run_cont:
                snapshots[f"density_{s:06d}"] = cont.rho
        if traj_every and run_disc and s % traj_every == 0:
            for a in range(agents.count):
                traj_rows.append((s, t, a) + tuple(agents.positions[a]))
        if s == steps:
            break

        if run_disc:
            _, _, u_field = control_pipeline(estimate, s)
            u_agents = sample_agent_inputs(u_field, agents.positions, backend=impl)
            v_agents = micro.pairwise_velocity(
                agents, kernel, truncated=cfg.limit_physical_interactions,
                backend=impl)
            w_agents = micro.eval_disturbance(
                disturbance, agents.positions, t, backend=impl)
            try:
                agents = micro.euler_step(agents, v_agents + u_agents + w_agents,
                                          cfg.dt)
            except NumericalFault:
                _dump_state(out_dir, s, agents=agents, density=None)
                raise

        if run_cont:
            _, q, u_field = control_pipeline(cont.rho, s)
            v_field = interaction_velocity(
                cont.rho, kernel, truncated=cfg.limit_physical_interactions)
            w_field = micro.disturbance_field(disturbance, grid, t)
            if cfg.control_mode == "source":
                # Control enters as a mass source; transport carries only
                # the physical and disturbance velocities.
                comps = tuple(v_field.components[a].values
                              + w_field.components[a].values
                              for a in range(cfg.d))
                source = q
            else:
                comps = tuple(v_field.components[a].values
                              + u_field.components[a].values
                              + w_field.components[a].values
                              for a in range(cfg.d))
                source = None
            vel = vector_field(grid, *comps)
            try:
                cont, audit = lax_friedrichs_step(cont, vel, cfg.dt,
                                                  source=source, backend=impl)
            except NumericalFault:
                _dump_state(out_dir, s, agents=agents, density=cont.rho)
                raise
            cfl_log[s] = audit.cfl
            clip_log[s] = audit.clipped_cells
            residual_log[s] = audit.mass_residual

        if evolving:
            target_state = reference_step(target_state, kernel, cfg.dt,
                                          backend=impl)
            v_target = interaction_velocity(target_state.rho, kernel,
                                            truncated=False)

    snapshots["target_final"] = target_state.rho
    estimate_final = kde_density(agents.positions, kde_spec, grid,
                                 backend=impl) if run_disc else None
    result = TrialResult(
        config=cfg,
        t=t_axis,
        err2_disc=err2_disc,
        err2_cont=err2_cont,
        mass_disc=mass_disc,
        mass_cont=mass_cont,
        cfl=cfl_log,
        clipped_cells=clip_log,
        mass_residual=residual_log,
        projections=projection_log,
        target_final=target_state.rho,
        density_final=cont.rho if run_cont else None,
        estimate_final=estimate_final,
        agents_final=agents,
        snapshots=snapshots,
        trajectory=np.array(traj_rows) if traj_rows else None,
    )
    try:
        result.bounds = bounds_mod.bounds_report(
            kernel, target_spec, grid, cfg.kp,
            disturbance=disturbance if disturbance.amplitude else None)
    except NoGuarantee:
        # Gain too small for a disturbance guarantee; keep the sensing
        # constants, which do not depend on kp.
        result.bounds = bounds_mod.bounds_report(kernel, target_spec, grid,
                                                 cfg.kp)
    if out_dir is not None:
        write_trial_outputs(result, out_dir)
    return result


def _dump_state(out_dir, step, agents=None, density=None):
    """Best-effort crash dump of the last finite state."""
    if out_dir is None:
        return
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    try:
        if density is not None:
            export_field_csv(density, path / f"fault_density_step{step}.csv")
        if agents is not None:
            np.savetxt(path / f"fault_agents_step{step}.csv",
                       agents.positions, delimiter=",", fmt=_FMT)
    except OSError:
        pass


def write_timeseries_csv(result: TrialResult, path) -> None:
    ebar_d = result.ebar_disc
    ebar_c = result.ebar_cont
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TIMESERIES_COLUMNS)
        for i in range(result.t.size):
            w.writerow([
                i,
                _FMT % result.t[i],
                _FMT % result.err2_disc[i],
                _FMT % result.err2_cont[i],
                _FMT % ebar_d[i],
                _FMT % ebar_c[i],
                _FMT % result.mass_disc[i],
                _FMT % result.mass_cont[i],
            ])


def write_audit_csv(result: TrialResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(AUDIT_COLUMNS)
        for i in range(result.t.size):
            w.writerow([
                i,
                _FMT % result.t[i],
                _FMT % result.cfl[i],
                int(result.clipped_cells[i]),
                _FMT % result.mass_residual[i],
                int(result.projections[i]),
            ])


def write_trial_outputs(result: TrialResult, out_dir) -> None:
    """Write the full output set for one trial under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    (out / "config.cfg").write_text(dump_config(cfg), encoding="utf-8")
    write_timeseries_csv(result, out / "timeseries.csv")
    write_audit_csv(result, out / "audit.csv")
    for name, fld in result.snapshots.items():
        export_field_csv(fld, out / f"{name}.csv")
    if result.density_final is not None:
        export_field_csv(result.density_final, out / "density_final.csv")
    if result.estimate_final is not None:
        export_field_csv(result.estimate_final, out / "estimate_final.csv")
    if result.agents_final is not None:
        np.savetxt(out / "agents_final.csv", result.agents_final.positions,
                   delimiter=",", fmt=_FMT,
                   header=",".join(f"x{i + 1}" for i in range(cfg.d)),
                   comments="")
    if result.trajectory is not None:
        cols = "step,t,agent," + ",".join(f"x{i + 1}" for i in range(cfg.d))
        np.savetxt(out / "trajectory.csv", result.trajectory, delimiter=",",
                   fmt=_FMT, header=cols, comments="")
    if result.bounds is not None:
        bounds_mod.write_bounds_csv(result.bounds, out / "bounds.csv")
    if cfg.plots:
        try:
            plot_error_history(result, out / "error.svg")
            plot_percentage_history(result, out / "ebar.svg")
        except Exception:
            pass  # plotting is best-effort; data files are authoritative


def plot_error_history(result: TrialResult, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    if np.any(np.isfinite(result.err2_disc)):
        ax.semilogy(result.t, np.maximum(result.err2_disc, 1e-300),
                    label="agents (estimated density)")
    if np.any(np.isfinite(result.err2_cont)):
        ax.semilogy(result.t, np.maximum(result.err2_cont, 1e-300),
                    label="continuum")
    ax.set_xlabel("t")
    ax.set_ylabel("tracking error, L2 norm")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_percentage_history(result: TrialResult, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    if np.any(np.isfinite(result.err2_disc)):
        ax.plot(result.t, result.ebar_disc, label="agents (estimated density)")
    if np.any(np.isfinite(result.err2_cont)):
        ax.plot(result.t, result.ebar_cont, label="continuum")
    ax.set_xlabel("t")
    ax.set_ylabel("error, % of peak")
    ax.set_ylim(bottom=0)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


SWEEP_COLUMNS = ("name", "sensing_radius", "disturbance_amplitude", "kp",
                 "final_ebar_disc", "final_ebar_cont", "observed_limsup",
                 "predicted_limsup", "bound_satisfied", "status")


def run_sweep(configs, out_root, max_workers: int = 4):
    """Run a batch of trials concurrently and aggregate a summary table.

    configs: sequence of (name, TrialConfig). Each trial writes into
    out_root/<name>/; the coordinator writes out_root/sweep.csv.
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)

    def one(item):
        name, cfg = item
        try:
            res = run_trial(cfg, out_dir=out_root / name)
            return name, cfg, res, None
        except Exception as exc:
            return name, cfg, None, exc

    rows = []
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        for name, cfg, res, exc in pool.map(one, list(configs)):
            if exc is not None:
                rows.append([name, _fmt_radius(cfg.sensing_radius),
                             _FMT % cfg.disturbance_amplitude, _FMT % cfg.kp,
                             "nan", "nan", "nan", "nan", "na",
                             f"error: {type(exc).__name__}: {exc}"])
                continue
            predicted = math.nan
            if res.bounds is not None and res.bounds.disturbance is not None:
                predicted = res.bounds.disturbance.predicted_limsup
            observed = res.observed_limsup()
            satisfied = "na"
            if math.isfinite(predicted) and math.isfinite(observed):
                satisfied = "true" if observed <= predicted else "false"
            rows.append([
                name, _fmt_radius(cfg.sensing_radius),
                _FMT % cfg.disturbance_amplitude, _FMT % cfg.kp,
                _FMT % res.ebar_disc[-1] if math.isfinite(res.err2_disc[-1]) else "nan",
                _FMT % res.ebar_cont[-1] if math.isfinite(res.err2_cont[-1]) else "nan",
                _FMT % observed, _FMT % predicted, satisfied, "ok",
            ])
    with open(out_root / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        w.writerows(rows)
    return rows


def _fmt_radius(r: float) -> str:
    return "unlimited" if math.isinf(r) else _FMT % r
