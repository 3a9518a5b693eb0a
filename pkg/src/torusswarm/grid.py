"""Cell-centered periodic grids on the square torus [-pi, pi)^d.

The domain is fixed to side length 2*pi in every axis, d in {1, 2}. A grid
with n cells per axis has spacing h = 2*pi/n and cell centers at
-pi + (j + 1/2)*h. All integrals are midpoint quadrature sums (weight h^d),
which is spectrally accurate for smooth periodic integrands and exact for
trigonometric polynomials resolved below the Nyquist mode.

Derivatives are second-order central differences with periodic wraparound.
Convolutions are spectral: the cyclic convolution theorem with an h^d
quadrature factor. For the convolution to reproduce the continuum circular
convolution at cell centers, the kernel-side factor must be sampled on the
displacement lattice {wrap(k*h)} (see kernels.kernel_field); center-to-center
displacements are exact multiples of h, so no phase correction is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter

TWO_PI = 2.0 * math.pi


def wrap_angle(u):
    """Principal value of a displacement on the circle, in [-pi, pi).

    Ties at an exact half period go to -pi. Works on scalars and arrays.
    """
    return u - TWO_PI * np.floor((u + math.pi) / TWO_PI)


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centered grid: d axes, n cells per axis, h = 2*pi/n."""

    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise InvalidParameter(f"d must be 1 or 2, got {self.d}")
        if self.n < 4 or self.n % 2 != 0:
            raise InvalidParameter(f"n must be even and >= 4, got {self.n}")

    @property
    def h(self) -> float:
        return TWO_PI / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    def centers_1d(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return -math.pi + (np.arange(self.n) + 0.5) * self.h

    def displacement_1d(self) -> np.ndarray:
        """Lattice of center-to-center displacements {wrap(k*h)}, k = 0..n-1."""
        return wrap_angle(np.arange(self.n) * self.h)

    def meshgrid(self) -> tuple:
        """Cell-center coordinate arrays, one per axis, each of full shape."""
        axes = [self.centers_1d() for _ in range(self.d)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def displacement_meshgrid(self) -> tuple:
        axes = [self.displacement_1d() for _ in range(self.d)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def mode_frequencies(self) -> tuple:
        """Signed integer mode numbers per axis, in FFT bin order."""
        m = np.fft.fftfreq(self.n, d=1.0 / self.n)
        axes = [m for _ in range(self.d)]
        return tuple(np.meshgrid(*axes, indexing="ij"))


def _lock(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=float)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class ScalarField:
    """Scalar samples at cell centers. Immutable once constructed."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise InvalidParameter(
                f"field shape {v.shape} does not match grid shape {self.grid.shape}"
            )
        object.__setattr__(self, "values", _lock(v))


@dataclass(frozen=True)
class VectorField:
    """d-component vector samples at cell centers."""

    grid: GridSpec
    components: tuple

    def __post_init__(self):
        comps = tuple(
            c if isinstance(c, ScalarField) else ScalarField(self.grid, c)
            for c in self.components
        )
        if len(comps) != self.grid.d:
            raise InvalidParameter(
                f"expected {self.grid.d} components, got {len(comps)}"
            )
        for c in comps:
            if c.grid != self.grid:
                raise InvalidParameter("component grids differ")
        object.__setattr__(self, "components", comps)

    def arrays(self) -> tuple:
        return tuple(c.values for c in self.components)


def scalar_field(grid: GridSpec, values) -> ScalarField:
    return ScalarField(grid, np.asarray(values, dtype=float))


def vector_field(grid: GridSpec, *components) -> VectorField:
    return VectorField(grid, tuple(components))


def field_from_function(grid: GridSpec, fn) -> ScalarField:
    """Sample fn(x1[, x2]) at cell centers."""
    return ScalarField(grid, fn(*grid.meshgrid()))


def constant_field(grid: GridSpec, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(value)))


def lp_norm(f: ScalarField, p) -> float:
    """Discrete L^p norm with quadrature weights: (sum |v|^p h^d)^(1/p).

    p may be any real >= 1 or infinity (max norm, no quadrature weight).
    """
    v = np.abs(f.values)
    if p == math.inf:
        return float(v.max())
    p = float(p)
    if not math.isfinite(p) or p < 1.0:
        raise InvalidParameter(f"norm order must be >= 1 or inf, got {p}")
    if p == 2.0:
        # dominant case in the control loop; keep it on the fast path
        return float(math.sqrt(np.sum(v * v) * f.grid.cell_volume))
    return float(np.sum(v ** p) * f.grid.cell_volume) ** (1.0 / p)


def integrate(f: ScalarField) -> float:
    """Midpoint quadrature of f over the torus."""
    return float(np.sum(f.values) * f.grid.cell_volume)


def _diff_central(v: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(v, -1, axis=axis) - np.roll(v, 1, axis=axis)) / (2.0 * h)


def gradient(f: ScalarField) -> VectorField:
    """Second-order central-difference gradient with periodic wraparound."""
    g = f.grid
    comps = tuple(_diff_central(f.values, a, g.h) for a in range(g.d))
    return VectorField(g, comps)


def divergence(vf: VectorField) -> ScalarField:
    g = vf.grid
    out = np.zeros(g.shape)
    for a, c in enumerate(vf.components):
        out += _diff_central(c.values, a, g.h)
    return ScalarField(g, out)


def laplacian(f: ScalarField) -> ScalarField:
    g = f.grid
    v = f.values
    out = np.zeros(g.shape)
    for a in range(g.d):
        out += (np.roll(v, -1, axis=a) + np.roll(v, 1, axis=a) - 2.0 * v) / g.h ** 2
    return ScalarField(g, out)


def curl2d(vf: VectorField) -> ScalarField:
    """Scalar curl d(w2)/dx1 - d(w1)/dx2 of a planar field (d=2 only)."""
    if vf.grid.d != 2:
        raise InvalidParameter("curl2d requires d=2")
    w1, w2 = vf.arrays()
    return ScalarField(
        vf.grid,
        _diff_central(w2, 0, vf.grid.h) - _diff_central(w1, 1, vf.grid.h),
    )


def circular_convolve(f: ScalarField, g: ScalarField) -> ScalarField:
    """Cyclic convolution with quadrature factor: ifft(fft(f)*fft(g)) * h^d.

    Commutative. Equals the midpoint quadrature of the continuum circular
    convolution at cell centers when one factor is sampled on the displacement
    lattice (kernels) and the other at cell centers (densities).
    """
    if f.grid != g.grid:
        raise InvalidParameter("operands live on different grids")
    axes = tuple(range(f.grid.d))
    spec = np.fft.rfftn(f.values) * np.fft.rfftn(g.values)
    out = np.fft.irfftn(spec, s=f.grid.shape, axes=axes) * f.grid.cell_volume
    return ScalarField(f.grid, out)


def circular_convolve_direct(f: ScalarField, g: ScalarField) -> ScalarField:
    """Direct-sum convolution oracle. Guarded to n <= 32 (O(n^(2d)) cost)."""
    if f.grid != g.grid:
        raise InvalidParameter("operands live on different grids")
    grid = f.grid
    if grid.n > 32:
        raise InvalidParameter("direct convolution oracle is limited to n <= 32")
    fv, gv = f.values, g.values
    out = np.zeros(grid.shape)
    if grid.d == 1:
        for i in range(grid.n):
            acc = 0.0
            for j in range(grid.n):
                acc += fv[j] * gv[(i - j) % grid.n]
            out[i] = acc
    else:
        n = grid.n
        for i1 in range(n):
            for i2 in range(n):
                acc = 0.0
                for j1 in range(n):
                    for j2 in range(n):
                        acc += fv[j1, j2] * gv[(i1 - j1) % n, (i2 - j2) % n]
                out[i1, i2] = acc
    return ScalarField(grid, out * grid.cell_volume)


def export_field_csv(f: ScalarField, path) -> None:
    """Write a field as CSV rows x1[,x2],value in row-major cell order."""
    g = f.grid
    coords = g.meshgrid()
    cols = [c.ravel() for c in coords] + [f.values.ravel()]
    header = ",".join([f"x{a + 1}" for a in range(g.d)] + ["value"])
    data = np.column_stack(cols)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in data:
            fh.write(",".join("%.12g" % x for x in row) + "\n")
