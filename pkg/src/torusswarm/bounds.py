"""Convergence and robustness bound constants for the controlled swarm.

Two closed-form guarantees are evaluated on the grid. Both are built from
quadrature norms of the target density (its L2 norm and the L2 norms of its
partial derivatives) combined with norms of the perturbing term.

* Limited sensing. Let g denote the per-axis gap between the truncated and
  the full interaction kernel, and g' its diagonal derivative. The squared
  tracking-error norm obeys

      d/dt |e|^2 <= (-2*kp + linear + quadratic * |e|) * |e|^2

  with linear  = 2 * sum over axes of (|target|_2 * |g'|_2
                                       + |target derivative|_2 * |g|_2)
  and  quadratic = sum over axes of |g'|_2.

  Convergence is guaranteed whenever kp exceeds the minimum convergent gain
  (linear + quadratic * |e(0)|_2) / 2.

* Velocity disturbance switched on mid-trial. From the per-axis sup norms
  of the disturbance and the sup norm of its divergence, the error norm
  eventually settles below forcing / decay, where

      forcing = 2 * (|target|_2 * divergence_sup
                     + sum over axes of |target derivative|_2 * component_sup)
      decay   = 2*kp - divergence_sup.

  A non-positive decay rate offers no guarantee.

All norms are grid quadratures at the trial resolution; a one-shot fine-grid
(4x cells per axis) cross-check is reported alongside the headline constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoGuarantee
from .grid import GridSpec, ScalarField, constant_field, divergence, gradient, lp_norm
from .kernels import (
    KernelSpec,
    TargetDensitySpec,
    kernel_difference_fields,
    von_mises_target,
)
from .micro import DisturbanceSpec

FINE_FACTOR = 4


@dataclass(frozen=True)
class SensingConstants:
    """Limited-sensing convergence constants at one grid resolution."""

    target_l2: float            # quadrature L2 norm of the target
    target_grad_l2: tuple       # L2 norm of each target partial derivative
    gap_l2: tuple               # L2 norm of each kernel-gap component
    gap_deriv_l2: tuple         # L2 norm of each diagonal gap derivative
    linear_coeff: float         # gain-independent term of the decay rate
    quadratic_coeff: float      # coefficient of |e| in the decay rate
    initial_error: float        # error norm the guarantee is anchored at
    min_gain: float             # smallest gain with guaranteed decay


@dataclass(frozen=True)
class DisturbanceBound:
    """Ultimate-bound constants for a switched-on disturbance."""

    component_sup: tuple        # sup |disturbance| per axis
    divergence_sup: float       # sup |div disturbance|
    forcing_coeff: float        # numerator of the settling bound
    decay_rate: float           # exponential decay rate of the error
    predicted_limsup: float     # forcing_coeff / decay_rate


@dataclass(frozen=True)
class BoundsReport:
    sensing: SensingConstants
    sensing_fine: SensingConstants
    disturbance: DisturbanceBound
    kp: float
    grid_n: int
    fine_n: int


def default_initial_error(target: ScalarField) -> float:
    """|e(0)|_2 for the canonical uniform start with matched mass."""
    grid = target.grid
    mean = np.mean(target.values)
    return lp_norm(ScalarField(grid, target.values - mean), 2)


def sensing_gap_constants(kernel: KernelSpec, target_spec: TargetDensitySpec,
                          grid: GridSpec, initial_error: float = None) -> SensingConstants:
    """Evaluate the kernel-gap convergence constants on one grid."""
    target = von_mises_target(target_spec, grid)
    target_l2 = lp_norm(target, 2)
    grad = gradient(target)
    m_i = tuple(lp_norm(c, 2) for c in grad.components)

    gap = kernel_difference_fields(kernel, grid)
    g_l2 = tuple(lp_norm(c, 2) for c in gap.components.components)
    gx_l2 = tuple(lp_norm(c, 2) for c in gap.diagonal_derivatives)

    f_coeff = 2.0 * sum(target_l2 * gx + m * g for gx, m, g in zip(gx_l2, m_i, g_l2))
    g_coeff = sum(gx_l2)

    gamma = default_initial_error(target) if initial_error is None else float(initial_error)
    return SensingConstants(
        target_l2=target_l2,
        target_grad_l2=m_i,
        gap_l2=g_l2,
        gap_deriv_l2=gx_l2,
        linear_coeff=f_coeff,
        quadratic_coeff=g_coeff,
        initial_error=gamma,
        min_gain=0.5 * (f_coeff + g_coeff * gamma),
    )


def disturbance_sups(disturbance: DisturbanceSpec, grid: GridSpec) -> tuple:
    """Per-axis sup norms and divergence sup norm once active."""
    if disturbance is None:
        return tuple(0.0 for _ in range(grid.d)), 0.0
    if disturbance.shape == "step":
        # constant in space once active: exactly divergence-free
        amp = abs(disturbance.amplitude)
        return tuple(amp for _ in range(grid.d)), 0.0
    table = disturbance.table
    comp = tuple(float(np.max(np.abs(c.values))) for c in table.components)
    div_sup = float(np.max(np.abs(divergence(table).values)))
    return comp, div_sup


def disturbance_bound(disturbance: DisturbanceSpec, kernel: KernelSpec,
                      target_spec: TargetDensitySpec, grid: GridSpec,
                      kp: float) -> DisturbanceBound:
    """Settling bound forcing/decay for the disturbance under gain kp."""
    target = von_mises_target(target_spec, grid)
    target_l2 = lp_norm(target, 2)
    m_i = tuple(lp_norm(c, 2) for c in gradient(target).components)
    comp_sup, div_sup = disturbance_sups(disturbance, grid)
    forcing = 2.0 * (target_l2 * div_sup + sum(m * w for m, w in zip(m_i, comp_sup)))
    decay = 2.0 * kp - div_sup
    if decay <= 0.0:
        raise NoGuarantee(
            f"decay rate 2*kp - sup|div disturbance| = {decay:.6g} is not positive; "
            "the bound offers no guarantee at this gain")
    predicted = forcing / decay
    return DisturbanceBound(
        component_sup=comp_sup,
        divergence_sup=div_sup,
        forcing_coeff=forcing,
        decay_rate=decay,
        predicted_limsup=predicted,
    )


def bounds_report(kernel: KernelSpec, target_spec: TargetDensitySpec,
                  grid: GridSpec, kp: float,
                  disturbance: DisturbanceSpec = None,
                  initial_error: float = None) -> BoundsReport:
    """Headline constants plus the fine-grid cross-check."""
    sensing = sensing_gap_constants(kernel, target_spec, grid, initial_error)
    fine_grid = GridSpec(grid.d, grid.n * FINE_FACTOR)
    sensing_fine = sensing_gap_constants(
        kernel, target_spec, fine_grid, sensing.initial_error)
    dist = None
    if disturbance is not None:
        dist = disturbance_bound(disturbance, kernel, target_spec, grid, kp)
    return BoundsReport(
        sensing=sensing,
        sensing_fine=sensing_fine,
        disturbance=dist,
        kp=kp,
        grid_n=grid.n,
        fine_n=fine_grid.n,
    )


def format_report(report: BoundsReport) -> str:
    """Aligned, human-readable rendering of a BoundsReport."""
    s, sf, d = report.sensing, report.sensing_fine, report.disturbance
    rows = [
        ("grid cells per axis", f"{report.grid_n}", f"{report.fine_n} (fine)"),
        ("target L2 norm", f"{s.target_l2:.6g}", f"{sf.target_l2:.6g}"),
    ]
    for a, (m, mf) in enumerate(zip(s.target_grad_l2, sf.target_grad_l2)):
        rows.append((f"target gradient L2, axis {a + 1}", f"{m:.6g}", f"{mf:.6g}"))
    for a, (g, gf) in enumerate(zip(s.gap_l2, sf.gap_l2)):
        rows.append((f"kernel gap L2, axis {a + 1}", f"{g:.6g}", f"{gf:.6g}"))
    for a, (g, gf) in enumerate(zip(s.gap_deriv_l2, sf.gap_deriv_l2)):
        rows.append((f"gap derivative L2, axis {a + 1}", f"{g:.6g}", f"{gf:.6g}"))
    rows += [
        ("sensing linear coeff", f"{s.linear_coeff:.6g}", f"{sf.linear_coeff:.6g}"),
        ("sensing quadratic coeff", f"{s.quadratic_coeff:.6g}", f"{sf.quadratic_coeff:.6g}"),
        ("initial error norm", f"{s.initial_error:.6g}", f"{sf.initial_error:.6g}"),
        ("minimum convergent gain", f"{s.min_gain:.6g}", f"{sf.min_gain:.6g}"),
        ("gain kp", f"{report.kp:.6g}", ""),
    ]
    if d is not None:
        rows += [
            ("disturbance component sup",
             ", ".join(f"{w:.6g}" for w in d.component_sup), ""),
            ("disturbance divergence sup", f"{d.divergence_sup:.6g}", ""),
            ("forcing coeff", f"{d.forcing_coeff:.6g}", ""),
            ("decay rate", f"{d.decay_rate:.6g}", ""),
            ("predicted limsup", f"{d.predicted_limsup:.6g}", ""),
        ]
    width = max(len(r[0]) for r in rows)
    lines = [f"{name:<{width}}  {v1:>14}  {v2:>14}".rstrip() for name, v1, v2 in rows]
    return "\n".join(lines)


def write_bounds_csv(report: BoundsReport, path) -> None:
    s, sf, d = report.sensing, report.sensing_fine, report.disturbance
    items = [
        ("grid_n", report.grid_n), ("fine_n", report.fine_n), ("kp", report.kp),
        ("target_l2", s.target_l2), ("target_l2_fine", sf.target_l2),
        ("linear_coeff", s.linear_coeff), ("linear_coeff_fine", sf.linear_coeff),
        ("quadratic_coeff", s.quadratic_coeff),
        ("quadratic_coeff_fine", sf.quadratic_coeff),
        ("initial_error", s.initial_error), ("min_gain", s.min_gain),
        ("min_gain_fine", sf.min_gain),
    ]
    if d is not None:
        items += [
            ("divergence_sup", d.divergence_sup),
            ("forcing_coeff", d.forcing_coeff),
            ("decay_rate", d.decay_rate),
            ("predicted_limsup", d.predicted_limsup),
        ]
    for a, m in enumerate(s.target_grad_l2):
        items.append((f"target_grad_l2_{a + 1}", m))
    for a, g in enumerate(s.gap_l2):
        items.append((f"gap_l2_{a + 1}", g))
    for a, g in enumerate(s.gap_deriv_l2):
        items.append((f"gap_deriv_l2_{a + 1}", g))
    if d is not None:
        for a, w in enumerate(d.component_sup):
            items.append((f"component_sup_{a + 1}", w))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("quantity,value\n")
        for name, value in items:
            fh.write(f"{name},%.12g\n" % value)
