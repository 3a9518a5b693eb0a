"""Microscopic agent dynamics on the torus.

Each of the N agents moves by forward Euler under the sum of pairwise
interaction velocities, its sampled control input, and the disturbance:

    x_i <- wrap(x_i + dt * (sum_k f(x_i - x_k) + u_i + W(x_i, t)))

Displacements are wrapped to their principal value, the self term vanishes
by antisymmetry, and positions re-enter [-pi, pi) after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import InvalidParameter, NumericalFault
from .grid import GridSpec, ScalarField, VectorField, wrap_angle
from .kernels import KernelSpec, eval_kernel, is_unlimited


@dataclass(frozen=True)
class AgentState:
    """Agent positions (N, d) at simulation time t."""

    positions: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        p = np.ascontiguousarray(self.positions, dtype=float)
        if p.ndim != 2 or p.shape[1] not in (1, 2):
            raise InvalidParameter("positions must have shape (N, d), d in {1, 2}")
        if p.shape[0] < 1:
            raise InvalidParameter("at least one agent is required")
        if np.any(p < -math.pi) or np.any(p >= math.pi):
            raise InvalidParameter("positions must lie in [-pi, pi)")
        p.setflags(write=False)
        object.__setattr__(self, "positions", p)

    @property
    def count(self) -> int:
        return self.positions.shape[0]


def initial_positions(n_agents: int, d: int, rng=None, mode: str = "random") -> np.ndarray:
    """Uniform random cloud (seeded rng) or a deterministic lattice."""
    if mode == "random":
        if rng is None:
            raise InvalidParameter("random initial positions require an rng")
        return rng.uniform(-math.pi, math.pi, size=(n_agents, d))
    if mode == "lattice":
        per_axis = math.ceil(n_agents ** (1.0 / d))
        axes = [(-math.pi + (np.arange(per_axis) + 0.5) * 2.0 * math.pi / per_axis)
                for _ in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        return pts[:n_agents].copy()
    raise InvalidParameter(f"unknown initial-position mode {mode!r}")


def pairwise_velocity(state: AgentState, kernel: KernelSpec,
                      truncated: bool = False, backend=None) -> np.ndarray:
    """Interaction velocity sum_k f(x_i - x_k) for every agent, O(N^2)."""
    pos = state.positions
    d = pos.shape[1]
    limited = truncated and not is_unlimited(kernel, d)
    if kernel.family == "wrapped-gaussian-repulsive":
        impl = _accel.resolve(backend)
        delta = kernel.sensing_radius if limited else -1.0
        return impl.pairwise_velocities(
            pos, kernel.strength, kernel.length_scale, delta)
    # generic family path: blockwise direct sum through eval_kernel
    out = np.zeros_like(pos)
    block = 256
    for start in range(0, pos.shape[0], block):
        stop = min(start + block, pos.shape[0])
        dz = pos[start:stop, None, :] - pos[None, :, :]
        vals = eval_kernel(kernel, dz, truncated=limited)
        out[start:stop] = vals.sum(axis=1)
    return out


@dataclass(frozen=True)
class DisturbanceSpec:
    """Exogenous velocity disturbance shared by both simulation levels.

    shape="step": zero before the onset time, then a constant vector with
    every component equal to amplitude. shape="table": a user-supplied grid
    VectorField switched on at the onset (sampled bilinearly for agents).
    """

    amplitude: float = 0.0
    onset: float = 0.0
    shape: str = "step"
    table: VectorField = None

    def __post_init__(self):
        if self.shape not in ("step", "table"):
            raise InvalidParameter(f"unknown disturbance shape {self.shape!r}")
        if self.shape == "table" and self.table is None:
            raise InvalidParameter("table disturbance requires a VectorField")

    def active(self, t: float) -> bool:
        return t >= self.onset and (self.shape == "table" or self.amplitude != 0.0)


def eval_disturbance(spec: DisturbanceSpec, positions: np.ndarray, t: float,
                     backend=None) -> np.ndarray:
    """Disturbance velocities at agent positions and time t."""
    positions = np.asarray(positions, dtype=float)
    out = np.zeros_like(positions)
    if spec is None or not spec.active(t):
        return out
    if spec.shape == "step":
        out[:] = spec.amplitude
        return out
    from .control import sample_agent_inputs
    return sample_agent_inputs(spec.table, positions, backend=backend)


def disturbance_field(spec: DisturbanceSpec, grid: GridSpec, t: float) -> VectorField:
    """The same disturbance as a grid field for the macroscopic level."""
    zero = np.zeros(grid.shape)
    if spec is None or not spec.active(t):
        return VectorField(grid, tuple(zero for _ in range(grid.d)))
    if spec.shape == "step":
        return VectorField(
            grid, tuple(np.full(grid.shape, spec.amplitude) for _ in range(grid.d)))
    if spec.table.grid != grid:
        raise InvalidParameter("disturbance table grid does not match trial grid")
    return spec.table


def euler_step(state: AgentState, velocity: np.ndarray, dt: float) -> AgentState:
    """Forward-Euler position update with periodic wrap.

    velocity is the total (N, d) input for this step. Raises NumericalFault
    naming the first offending agent if any velocity is non-finite.
    """
    if dt <= 0:
        raise InvalidParameter("dt must be > 0")
    velocity = np.asarray(velocity, dtype=float)
    if velocity.shape != state.positions.shape:
        raise InvalidParameter("velocity shape does not match positions")
    finite = np.isfinite(velocity).all(axis=1)
    if not finite.all():
        bad = int(np.argmin(finite))
        raise NumericalFault(f"non-finite velocity for agent {bad} at t={state.t:.6g}")
    new_pos = wrap_angle(state.positions + dt * velocity)
    return AgentState(new_pos, state.t + dt)


def mean_nearest_neighbor_distance(state: AgentState) -> float:
    """Mean wrapped Euclidean distance to the nearest neighbor."""
    pos = state.positions
    dz = wrap_angle(pos[:, None, :] - pos[None, :, :])
    dist = np.sqrt(np.sum(dz * dz, axis=-1))
    np.fill_diagonal(dist, np.inf)
    return float(dist.min(axis=1).mean())
