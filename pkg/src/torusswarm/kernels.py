"""Interaction kernels, target densities, and kernel density estimation.

The default interaction family is an antisymmetric repulsive kernel

    f(z) = strength * z * exp(-|z|^2 / (2 * length_scale^2))

acting on wrapped displacements z, so it is periodic by construction and
pushes the evaluating agent away from its neighbor. Additional families can
be registered; antisymmetry f(-z) = -f(z) and periodicity are the enforced
contract for any family.

Limited sensing truncates the kernel to the closed Euclidean ball of radius
delta: f_trunc(z) = f(z) * 1{|z|_2 <= delta}. The gap g = f_trunc - f feeds
the robustness constants in torusswarm.bounds.

Kernel fields are sampled on the displacement lattice {wrap(k*h)} (multiples
of the grid spacing), because center-to-center displacements are exact
multiples of h; see torusswarm.grid.circular_convolve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _accel
from .errors import InvalidParameter
from .grid import (
    GridSpec,
    ScalarField,
    VectorField,
    _diff_central,
    integrate,
    wrap_angle,
)

# magnitude below which a kernel tail is considered numerically zero
TAIL_EPS = 1e-12


def wrapped_displacement(a, b):
    """Componentwise wrapped displacement a - b, principal value [-pi, pi)."""
    return wrap_angle(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


def _gaussian_repulsive(spec, *z):
    r2 = sum(zi * zi for zi in z)
    w = spec.strength * np.exp(-r2 / (2.0 * spec.length_scale ** 2))
    return tuple(w * zi for zi in z)


_FAMILIES = {"wrapped-gaussian-repulsive": _gaussian_repulsive}


def register_kernel_family(name: str, fn) -> None:
    """Register a custom kernel family fn(spec, *z_components) -> components.

    The callable must be antisymmetric and act on wrapped displacements.
    """
    _FAMILIES[name] = fn


@dataclass(frozen=True)
class KernelSpec:
    """Pairwise interaction kernel parameters."""

    strength: float = 1.0
    length_scale: float = 0.5
    sensing_radius: float = math.inf  # inf means unlimited
    family: str = "wrapped-gaussian-repulsive"

    def __post_init__(self):
        if self.strength < 0:
            raise InvalidParameter("kernel strength must be >= 0")
        if self.length_scale <= 0:
            raise InvalidParameter("kernel length_scale must be > 0")
        if not (self.sensing_radius > 0):
            raise InvalidParameter("sensing_radius must be > 0 (inf = unlimited)")
        if self.family not in _FAMILIES:
            raise InvalidParameter(f"unknown kernel family {self.family!r}")


def is_unlimited(spec: KernelSpec, d: int) -> bool:
    """True when truncation at the sensing radius cannot drop any pair.

    Always true for sensing_radius >= pi*sqrt(d) (the diameter of the wrapped
    displacement set). For the default family, a radius >= pi whose excluded
    tail magnitude falls below 1e-12 is also treated as unlimited.
    """
    delta = spec.sensing_radius
    if delta >= math.pi * math.sqrt(d):
        return True
    if spec.family == "wrapped-gaussian-repulsive" and delta >= math.pi:
        # |f|(r) = strength * r * exp(-r^2/(2 l^2)) decreases for r > l
        tail = spec.strength * delta * math.exp(
            -delta * delta / (2.0 * spec.length_scale ** 2)
        )
        return tail < TAIL_EPS
    return False


def eval_kernel(spec: KernelSpec, z, truncated: bool = False):
    """Evaluate the kernel at displacements z of shape (..., d).

    Displacements are wrapped to their principal value first, making the
    kernel periodic regardless of family. With truncated=True, values beyond
    |z|_2 > sensing_radius are zeroed (closed-ball convention).
    """
    z = wrap_angle(np.asarray(z, dtype=float))
    if z.ndim < 1:
        raise InvalidParameter("z must have shape (..., d)")
    d = z.shape[-1]
    comps = _FAMILIES[spec.family](spec, *(z[..., a] for a in range(d)))
    if truncated and not is_unlimited(spec, d):
        r2 = sum(z[..., a] ** 2 for a in range(d))
        mask = r2 <= spec.sensing_radius ** 2
        comps = tuple(np.where(mask, c, 0.0) for c in comps)
    return np.stack(comps, axis=-1)


@lru_cache(maxsize=32)
def kernel_field(spec: KernelSpec, grid: GridSpec, truncated: bool = False) -> VectorField:
    """Kernel components sampled on the displacement lattice {wrap(k*h)}.

    On an even lattice the seam displacement -pi has no +pi partner. A
    periodic antisymmetric component must vanish there along its own axis
    (periodicity gives f(pi) = f(-pi), oddness gives f(pi) = -f(-pi)), so
    the seam slot takes that symmetrized value 0. This keeps the discrete
    convolution operator exactly antisymmetric; in particular a flat
    density is force-free to round-off.
    """
    disp = np.stack(grid.displacement_meshgrid(), axis=-1)
    vals = eval_kernel(spec, disp, truncated=truncated)
    comps = []
    for a in range(grid.d):
        c = np.ascontiguousarray(vals[..., a])
        if grid.n % 2 == 0:
            seam = [slice(None)] * grid.d
            seam[a] = grid.n // 2
            c[tuple(seam)] = 0.0
        comps.append(c)
    return VectorField(grid, tuple(comps))


@lru_cache(maxsize=32)
def kernel_spectra(spec: KernelSpec, grid: GridSpec, truncated: bool = False) -> tuple:
    """rfftn of each kernel component; cached for the per-step convolutions."""
    kf = kernel_field(spec, grid, truncated)
    return tuple(np.fft.rfftn(c.values) for c in kf.components)


@dataclass(frozen=True)
class KernelGap:
    """Truncated-minus-full kernel gap g and its diagonal derivatives."""

    components: VectorField            # g_i on the displacement lattice
    diagonal_derivatives: tuple        # d(g_i)/d(x_i), central differences


def kernel_difference_fields(spec: KernelSpec, grid: GridSpec) -> KernelGap:
    """Gap fields g = f_trunc - f and the diagonal derivative fields."""
    full = kernel_field(spec, grid, truncated=False)
    trunc = kernel_field(spec, grid, truncated=True)
    comps = tuple(t.values - f.values for t, f in zip(trunc.components, full.components))
    gvf = VectorField(grid, comps)
    derivs = tuple(
        ScalarField(grid, _diff_central(c, a, grid.h))
        for a, c in enumerate(comps)
    )
    return KernelGap(gvf, derivs)


@dataclass(frozen=True)
class TargetDensitySpec:
    """Product von Mises target: concentration, center, total mass.

    The library default concentration gives a visibly peaked target; trial
    configs use a gentler value so the nominal gain and step size stay
    inside the transport scheme's admissible region (see TrialConfig).
    """

    concentration: float = 4.0
    center: tuple = (0.0, 0.0)
    mass: float = 100.0

    def __post_init__(self):
        if self.concentration < 0:
            raise InvalidParameter("concentration must be >= 0")
        if self.mass <= 0:
            raise InvalidParameter("target mass must be > 0")


def von_mises_target(spec: TargetDensitySpec, grid: GridSpec) -> ScalarField:
    """Von Mises bump exp(kappa * sum_i cos(x_i - c_i)), grid-normalized.

    The normalizer is the grid quadrature itself, so integrate() returns the
    requested mass to round-off at any resolution.
    """
    center = spec.center[: grid.d]
    if len(center) != grid.d:
        raise InvalidParameter("target center has fewer entries than grid axes")
    coords = grid.meshgrid()
    logv = sum(
        spec.concentration * np.cos(x - c) for x, c in zip(coords, center)
    )
    raw = np.exp(logv)
    total = raw.sum() * grid.cell_volume
    return ScalarField(grid, raw * (spec.mass / total))


@dataclass(frozen=True)
class KdeSpec:
    """Wrapped-Gaussian density estimator parameters."""

    bandwidth: float = 0.3
    agent_mass: float = 1.0

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise InvalidParameter("KDE bandwidth must be > 0")
        if self.agent_mass <= 0:
            raise InvalidParameter("agent mass must be > 0")


def kde_density(positions, spec: KdeSpec, grid: GridSpec, backend=None) -> ScalarField:
    """Wrapped-Gaussian KDE of the agent cloud, exact grid mass per agent.

    The periodic image sum is truncated at 3 images per axis; each agent's
    per-axis weight row is normalized to unit grid integral, so the estimate
    integrates to N * agent_mass regardless of bandwidth or position.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 2 or positions.shape[1] != grid.d:
        raise InvalidParameter("positions must have shape (N, d)")
    impl = _accel.resolve(backend)
    vals = impl.kde_field(
        positions, spec.bandwidth, spec.agent_mass, grid.n, grid.h,
        grid.centers_1d(),
    )
    return ScalarField(grid, vals)


def mass_match_check(density: ScalarField, target: ScalarField, tol: float = 1e-8):
    """Return (mass, target_mass, ok) under the relative tolerance."""
    m = integrate(density)
    mt = integrate(target)
    return m, mt, abs(m - mt) <= tol * abs(mt)
