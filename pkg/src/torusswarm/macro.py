"""Macroscopic transport: mass balance on the torus by finite volumes.

The density obeys rho_t + div(rho * v) = q with v assembled by the caller
(interaction velocity + control velocity + disturbance). Transport uses the
local Lax-Friedrichs (Rusanov) flux on cell faces; the source term is added
by forward-Euler splitting after the transport update. The update is
conservative: without a source, total mass is preserved to round-off.

Stability is explicit-advective: the CFL number dt * max|v| / h must stay
at or below 1. Steps warn above 0.9 and are rejected above 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import CflWarning, InvalidParameter, NumericalFault, StepRejected
from .grid import GridSpec, ScalarField, VectorField, integrate
from .kernels import KernelSpec, is_unlimited, kernel_spectra

# density floor for negative-cell clipping, in absolute density units
CLIP_FLOOR = 1e-12

# per-step conservation audit tolerance, relative to total mass
MASS_RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class MacroState:
    """Density snapshot at simulation time t."""

    rho: ScalarField
    t: float = 0.0


@dataclass(frozen=True)
class StepAudit:
    """Per-step diagnostics from lax_friedrichs_step."""

    cfl: float
    clipped_cells: int
    mass_residual: float


def interaction_velocity(rho: ScalarField, kernel: KernelSpec,
                         truncated: bool = False) -> VectorField:
    """Mean-field velocity v = f * rho (componentwise circular convolution)."""
    grid = rho.grid
    spectra = kernel_spectra(kernel, grid, truncated)
    rho_hat = np.fft.rfftn(rho.values)
    axes = tuple(range(grid.d))
    comps = tuple(
        np.fft.irfftn(k_hat * rho_hat, s=grid.shape, axes=axes)
        * grid.cell_volume
        for k_hat in spectra
    )
    return VectorField(grid, comps)


def velocity_sup(velocity: VectorField) -> float:
    """Largest component magnitude, the speed entering the CFL number."""
    return max(float(np.max(np.abs(c.values))) for c in velocity.components)


def cfl_number(velocity: VectorField, dt: float) -> float:
    return dt * velocity_sup(velocity) / velocity.grid.h


def max_stable_dt(velocity: VectorField) -> float:
    """Largest dt with CFL exactly 1 for this velocity field."""
    vmax = velocity_sup(velocity)
    if vmax == 0.0:
        return math.inf
    return velocity.grid.h / vmax


def _clip_negative(values: np.ndarray):
    """Floor negative cells at CLIP_FLOOR, repaying mass from positive cells.

    Returns (values, number of clipped cells). The repayment is proportional
    to the positive cell values, so total mass is preserved to round-off.
    """
    neg = values < 0.0
    count = int(np.count_nonzero(neg))
    if count == 0:
        return values, 0
    added = float(np.sum(CLIP_FLOOR - values[neg]))
    values = values.copy()
    values[neg] = CLIP_FLOOR
    pos = values > CLIP_FLOOR
    pos_total = float(np.sum(values[pos]))
    if pos_total > 0.0:
        values[pos] -= added * values[pos] / pos_total
    return values, count


def lax_friedrichs_step(state: MacroState, velocity: VectorField, dt: float,
                        source: ScalarField = None, backend=None):
    """Advance the density by one explicit conservative step.

    Returns (new_state, StepAudit). Raises StepRejected when the CFL number
    exceeds 1 (the error carries the largest admissible dt) and NumericalFault
    on non-finite results or a conservation-audit failure.
    """
    grid = state.rho.grid
    if velocity.grid != grid:
        raise InvalidParameter("velocity grid does not match state grid")
    if dt <= 0:
        raise InvalidParameter("dt must be > 0")
    cfl = cfl_number(velocity, dt)
    if cfl > 1.0:
        raise StepRejected(cfl, dt, max_stable_dt(velocity))
    if cfl > 0.9:
        warnings.warn(
            f"CFL number {cfl:.3f} is above 0.9; the step remains admissible "
            "but dissipation is large", CflWarning, stacklevel=2)

    impl = _accel.resolve(backend)
    new_vals = impl.rusanov_transport(state.rho.values, velocity.arrays(), dt, grid.h)

    source_mass = 0.0
    if source is not None:
        if source.grid != grid:
            raise InvalidParameter("source grid does not match state grid")
        new_vals = new_vals + dt * source.values
        source_mass = dt * integrate(source)

    new_vals, clipped = _clip_negative(new_vals)

    if not np.all(np.isfinite(new_vals)):
        raise NumericalFault(f"non-finite density after step at t={state.t:.6g}")

    new_rho = ScalarField(grid, new_vals)
    mass_before = integrate(state.rho)
    mass_after = integrate(new_rho)
    residual = abs(mass_after - mass_before - source_mass)
    budget = MASS_RESIDUAL_TOL * max(abs(mass_before), 1.0)
    if residual > budget:
        raise NumericalFault(
            f"mass-balance residual {residual:.3e} exceeds budget {budget:.3e} "
            f"at t={state.t:.6g}")
    return MacroState(new_rho, state.t + dt), StepAudit(cfl, clipped, residual)


def reference_step(target_state: MacroState, kernel: KernelSpec, dt: float,
                   backend=None):
    """Advance the target density under its own mean-field transport.

    Used in evolving-target mode, where the reference obeys the same
    conservation law as the controlled density (with zero source). In
    static-target mode the caller simply keeps the target unchanged.
    """
    vel = interaction_velocity(target_state.rho, kernel, truncated=False)
    state, _ = lax_friedrichs_step(target_state, vel, dt, source=None,
                                   backend=backend)
    return state
