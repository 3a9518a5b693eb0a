"""Control synthesis: error-feedback source and its flux realization.

Given the error e = target - density, the macroscopic control source is

    q = kp * e - div(e * v_target) - div(density * v_error)

with v_target = f * target and v_error = f_sensed * e, where f_sensed is the
full kernel under unlimited sensing and the truncated kernel otherwise.
Transport terms use central differences, so q integrates to zero whenever
the error does.

The source is realized as a velocity through the flux decomposition
w = density * U with div(w) = -q and curl(w) = 0, hence w = -grad(phi) with
a periodic Poisson problem lap(phi) = q. On the torus the solve is spectral:
each Fourier coefficient of phi is -c_m / |m|^2 for mode m != 0, the mean
mode is fixed to zero (free constant chosen as 0), and modes beyond the band
limit are dropped. U = w / max(density, floor) with a relative density floor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import InvalidParameter, MassMismatchError, ZeroMeanProjection
from .grid import GridSpec, ScalarField, VectorField, _diff_central, integrate, lp_norm
from .kernels import KernelSpec, kernel_spectra

ZERO_MEAN_TOL = 1e-8


@dataclass(frozen=True)
class ControlGains:
    """Feedback gain, spectral band limit, and density-floor setting.

    modes=None uses the full resolvable band (n/2). density_floor is
    relative: the floor in density units is density_floor * mean density.
    """

    kp: float
    modes: int = None
    density_floor: float = 1e-6

    def __post_init__(self):
        if self.kp <= 0:
            raise InvalidParameter("kp must be > 0")
        if self.modes is not None and self.modes < 1:
            raise InvalidParameter("modes must be >= 1 or None")
        if self.density_floor <= 0:
            raise InvalidParameter("density_floor must be > 0")

    def band(self, grid: GridSpec) -> int:
        m = grid.n // 2 if self.modes is None else self.modes
        if m > grid.n // 2:
            raise InvalidParameter(
                f"modes {m} exceeds the Nyquist band {grid.n // 2}")
        return m


@dataclass(frozen=True)
class FluxSolution:
    """Spectral Poisson solution: potential, flux, and mode coefficients."""

    phi: ScalarField
    w: VectorField
    coefficients: np.ndarray   # Fourier-series coefficients, FFT bin order
    band: int
    mean_projected: bool


def _convolve_spectrum(k_hats, field: ScalarField) -> VectorField:
    grid = field.grid
    f_hat = np.fft.rfftn(field.values)
    axes = tuple(range(grid.d))
    comps = tuple(
        np.fft.irfftn(k * f_hat, s=grid.shape, axes=axes) * grid.cell_volume
        for k in k_hats
    )
    return VectorField(grid, comps)


def macroscopic_control(error: ScalarField, density: ScalarField,
                        target: ScalarField, kernel: KernelSpec,
                        gains: ControlGains, limited: bool = False,
                        v_target: VectorField = None) -> ScalarField:
    """Feedback source q driving the density toward the target.

    Preconditions: error, density, target share one grid and the error has
    zero mean relative to the target mass (raises MassMismatchError
    otherwise). v_target may be passed in when the target is static, to avoid
    recomputing the constant convolution every step.
    """
    grid = error.grid
    if density.grid != grid or target.grid != grid:
        raise InvalidParameter("control fields live on different grids")
    target_mass = integrate(target)
    err_mass = integrate(error)
    if abs(err_mass) > ZERO_MEAN_TOL * abs(target_mass):
        raise MassMismatchError(integrate(density), target_mass, ZERO_MEAN_TOL)

    if v_target is None:
        v_target = _convolve_spectrum(
            kernel_spectra(kernel, grid, False), target)
    v_error = _convolve_spectrum(
        kernel_spectra(kernel, grid, limited), error)

    q = gains.kp * error.values
    for a in range(grid.d):
        q -= _diff_central(error.values * v_target.components[a].values, a, grid.h)
        q -= _diff_central(density.values * v_error.components[a].values, a, grid.h)
    return ScalarField(grid, q)


def _mode_grids(grid: GridSpec):
    m = grid.mode_frequencies()
    m2 = sum(mi ** 2 for mi in m)
    sup = np.abs(m[0])
    for mi in m[1:]:
        sup = np.maximum(sup, np.abs(mi))
    return m, m2.astype(float), sup


def solve_flux(q: ScalarField, gains: ControlGains) -> FluxSolution:
    """Solve lap(phi) = q spectrally and return the flux w = -grad(phi).

    The source must have zero mean up to 1e-8 * |q|_2; larger means are
    projected out with a ZeroMeanProjection warning (flagged in the result).
    The gradient is spectral; Nyquist bins carry no well-defined first
    derivative and are excluded from w.
    """
    grid = q.grid
    band = gains.band(grid)
    modes, m2, sup = _mode_grids(grid)

    q_hat = np.fft.fftn(q.values)
    ncells = q.values.size
    mean = abs(q_hat.flat[0]) / ncells
    scale = lp_norm(q, 2)
    projected = bool(mean > ZERO_MEAN_TOL * max(scale, 1e-300))
    if projected:
        warnings.warn(
            f"control source mean {mean:.3e} projected to zero",
            ZeroMeanProjection, stacklevel=2)

    keep = (sup <= band)
    m2_safe = np.where(m2 == 0.0, 1.0, m2)
    phi_hat = np.where(keep, -q_hat / m2_safe, 0.0)
    phi_hat.flat[0] = 0.0  # free constant fixed to zero
    phi = np.fft.ifftn(phi_hat).real

    # spectral first derivative is ill-defined at the Nyquist bin; zero it
    half = grid.n // 2
    comps = []
    for mi in modes:
        deriv = np.where(np.abs(mi) == half, 0.0, mi)
        comps.append(np.fft.ifftn(-1j * deriv * phi_hat).real)

    # Fourier-series coefficients at cell-center phase convention
    phase = np.zeros(grid.shape)
    x0 = -math.pi + grid.h / 2.0
    for mi in modes:
        phase = phase + mi * x0
    gamma = phi_hat * np.exp(-1j * phase) / ncells

    return FluxSolution(
        phi=ScalarField(grid, phi),
        w=VectorField(grid, tuple(comps)),
        coefficients=gamma,
        band=band,
        mean_projected=projected,
    )


def divergence_spectral(vf: VectorField) -> ScalarField:
    """Spectral divergence (Nyquist bins excluded), for residual checks."""
    grid = vf.grid
    modes, _, _ = _mode_grids(grid)
    half = grid.n // 2
    out = np.zeros(grid.shape, dtype=complex)
    for mi, comp in zip(modes, vf.components):
        deriv = np.where(np.abs(mi) == half, 0.0, mi)
        out += 1j * deriv * np.fft.fftn(comp.values)
    return ScalarField(grid, np.fft.ifftn(out).real)


def curl_spectral(vf: VectorField) -> ScalarField:
    """Spectral scalar curl for d=2 irrotationality checks."""
    if vf.grid.d != 2:
        raise InvalidParameter("curl requires d=2")
    grid = vf.grid
    modes, _, _ = _mode_grids(grid)
    half = grid.n // 2
    m1 = np.where(np.abs(modes[0]) == half, 0.0, modes[0])
    m2 = np.where(np.abs(modes[1]) == half, 0.0, modes[1])
    w1_hat = np.fft.fftn(vf.components[0].values)
    w2_hat = np.fft.fftn(vf.components[1].values)
    out = 1j * m1 * w2_hat - 1j * m2 * w1_hat
    return ScalarField(grid, np.fft.ifftn(out).real)


def control_velocity(w: VectorField, density: ScalarField,
                     gains: ControlGains) -> VectorField:
    """Agent velocity field U = w / max(density, floor).

    The floor is relative to the mean density, so the division is safe in
    evacuated regions without distorting the control where mass is present.
    """
    grid = w.grid
    if density.grid != grid:
        raise InvalidParameter("density grid does not match flux grid")
    mean_density = integrate(density) / (2.0 * math.pi) ** grid.d
    floor = gains.density_floor * mean_density
    if floor <= 0:
        raise InvalidParameter("density floor must be positive (empty density?)")
    denom = np.maximum(density.values, floor)
    return VectorField(grid, tuple(c.values / denom for c in w.components))


def sample_agent_inputs(velocity: VectorField, positions,
                        backend=None) -> np.ndarray:
    """Bilinear periodic interpolation of the velocity field at agents."""
    grid = velocity.grid
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 2 or positions.shape[1] != grid.d:
        raise InvalidParameter("positions must have shape (N, d)")
    impl = _accel.resolve(backend)
    cols = [
        impl.bilinear_sample(c.values, positions, grid.h, grid.d)
        for c in velocity.components
    ]
    return np.stack(cols, axis=-1)
