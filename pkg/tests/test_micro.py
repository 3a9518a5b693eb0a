"""Agent-level dynamics: pairwise sums, Euler stepping, disturbances."""

import math

import numpy as np
import pytest

from torusswarm import (
    AgentState,
    DisturbanceSpec,
    GridSpec,
    InvalidParameter,
    KernelSpec,
    NumericalFault,
    disturbance_field,
    divergence,
    euler_step,
    eval_disturbance,
    initial_positions,
    mean_nearest_neighbor_distance,
    pairwise_velocity,
    vector_field,
)

PI = math.pi
KER = KernelSpec(strength=0.05, length_scale=0.5)


def test_single_agent_is_force_free(backend):
    state = AgentState(np.array([[0.3, -1.2]]))
    v = pairwise_velocity(state, KER, backend=backend)
    np.testing.assert_array_equal(v, 0.0)


def test_two_agents_closed_form(backend):
    """Two agents at +-a repel with the closed-form kernel value."""
    a = 0.4
    state = AgentState(np.array([[a], [-a]]))
    v = pairwise_velocity(state, KER, backend=backend)
    w = 0.05 * 2 * a * math.exp(-(2 * a) ** 2 / (2 * 0.5 ** 2))
    assert v[0, 0] == pytest.approx(w, rel=1e-14)
    assert v[1, 0] == pytest.approx(-w, rel=1e-14)


def test_three_agent_ring_is_balanced(backend):
    """Equally spaced agents on the circle feel zero net velocity."""
    state = AgentState(np.array([[-2 * PI / 3], [0.0], [2 * PI / 3]]))
    v = pairwise_velocity(state, KER, backend=backend)
    np.testing.assert_allclose(v, 0.0, atol=1e-15)


def test_pairwise_momentum_free(rng, backend):
    """Antisymmetry cancels pairwise: the velocity sum vanishes."""
    for d in (1, 2):
        pos = rng.uniform(-PI, PI, size=(50, d))
        state = AgentState(pos)
        for truncated in (False, True):
            spec = KernelSpec(strength=0.05, length_scale=0.5,
                              sensing_radius=1.0)
            v = pairwise_velocity(state, spec, truncated=truncated,
                                  backend=backend)
            np.testing.assert_allclose(v.sum(axis=0), 0.0, atol=1e-10)


def test_pairwise_permutation_equivariance(rng, backend):
    pos = rng.uniform(-PI, PI, size=(30, 2))
    perm = rng.permutation(30)
    v = pairwise_velocity(AgentState(pos), KER, backend=backend)
    vp = pairwise_velocity(AgentState(pos[perm]), KER, backend=backend)
    np.testing.assert_allclose(vp, v[perm], atol=1e-13)


def test_pairwise_truncation(backend):
    """Agents farther apart than the sensing radius do not interact."""
    spec = KernelSpec(strength=0.05, length_scale=0.5, sensing_radius=0.5)
    far = AgentState(np.array([[0.0, 0.0], [2.0, 0.0]]))
    v = pairwise_velocity(far, spec, truncated=True, backend=backend)
    np.testing.assert_array_equal(v, 0.0)
    near = AgentState(np.array([[0.0, 0.0], [0.3, 0.0]]))
    v_t = pairwise_velocity(near, spec, truncated=True, backend=backend)
    v_f = pairwise_velocity(near, spec, truncated=False, backend=backend)
    np.testing.assert_allclose(v_t, v_f, atol=1e-15)


def test_pairwise_wrapped_distance(backend):
    """Interaction acts through the seam: x = 3.0 and x = -3.0 are close."""
    state = AgentState(np.array([[3.0], [-3.0]]))
    v = pairwise_velocity(state, KER, backend=backend)
    z = 3.0 - (-3.0) - 2 * PI  # wrapped displacement, about -0.28
    w = 0.05 * z * math.exp(-z * z / (2 * 0.5 ** 2))
    assert v[0, 0] == pytest.approx(w, rel=1e-12)


def test_generic_family_matches_direct_sum(rng):
    """A registered custom family runs through the blockwise generic path."""
    from torusswarm import register_kernel_family

    register_kernel_family(
        "test-linear", lambda spec, *z: tuple(spec.strength * zi for zi in z))
    spec = KernelSpec(strength=0.1, family="test-linear")
    pos = rng.uniform(-PI, PI, size=(20, 2))
    v = pairwise_velocity(AgentState(pos), spec)
    from torusswarm import wrapped_displacement

    expect = np.zeros_like(pos)
    for i in range(20):
        dz = wrapped_displacement(pos[i], pos)
        expect[i] = 0.1 * dz.sum(axis=0)
    np.testing.assert_allclose(v, expect, atol=1e-12)


def test_agent_state_validation():
    with pytest.raises(InvalidParameter):
        AgentState(np.zeros((0, 2)))
    with pytest.raises(InvalidParameter):
        AgentState(np.zeros((4, 3)))
    with pytest.raises(InvalidParameter):
        AgentState(np.array([[4.0]]))  # outside [-pi, pi)
    state = AgentState(np.zeros((3, 2)))
    assert state.count == 3
    assert not state.positions.flags.writeable


def test_initial_positions_modes(rng):
    pos = initial_positions(100, 2, rng)
    assert pos.shape == (100, 2)
    assert np.all(pos >= -PI) and np.all(pos < PI)
    again = initial_positions(100, 2, np.random.default_rng(0))
    strict = initial_positions(100, 2, np.random.default_rng(0))
    np.testing.assert_array_equal(again, strict)
    lat = initial_positions(9, 2, mode="lattice")
    assert lat.shape == (9, 2)
    assert np.all(lat >= -PI) and np.all(lat < PI)
    with pytest.raises(InvalidParameter):
        initial_positions(10, 2, mode="spiral")
    with pytest.raises(InvalidParameter):
        initial_positions(10, 2)  # random mode needs an rng


def test_euler_step_wraps():
    state = AgentState(np.array([[PI - 0.001]]))
    new = euler_step(state, np.array([[2.0]]), 0.001)
    assert new.positions[0, 0] == pytest.approx(-PI + 0.001, abs=1e-12)
    assert new.t == pytest.approx(0.001)


def test_euler_step_validation():
    state = AgentState(np.zeros((2, 1)))
    with pytest.raises(InvalidParameter):
        euler_step(state, np.zeros((2, 1)), 0.0)
    with pytest.raises(InvalidParameter):
        euler_step(state, np.zeros((3, 1)), 0.01)
    bad = np.array([[0.0], [np.nan]])
    with pytest.raises(NumericalFault) as info:
        euler_step(state, bad, 0.01)
    assert "agent 1" in str(info.value)


def test_disturbance_step_shape(backend):
    spec = DisturbanceSpec(amplitude=0.5, onset=1.0)
    pos = np.zeros((4, 2))
    np.testing.assert_array_equal(eval_disturbance(spec, pos, 0.5,
                                                   backend=backend), 0.0)
    out = eval_disturbance(spec, pos, 1.0, backend=backend)
    np.testing.assert_array_equal(out, 0.5)
    # zero amplitude never activates
    idle = DisturbanceSpec(amplitude=0.0, onset=0.0)
    assert not idle.active(10.0)


def test_disturbance_step_field_divergence_free():
    g = GridSpec(2, 24)
    spec = DisturbanceSpec(amplitude=1.5, onset=0.0)
    fld = disturbance_field(spec, g, 0.0)
    for c in fld.components:
        np.testing.assert_array_equal(c.values, 1.5)
    np.testing.assert_array_equal(divergence(fld).values, 0.0)
    before = disturbance_field(spec, g, -1.0)
    for c in before.components:
        np.testing.assert_array_equal(c.values, 0.0)


def test_disturbance_table(backend):
    g = GridSpec(2, 16)
    x1, x2 = g.meshgrid()
    table = vector_field(g, np.sin(x1), np.cos(x2))
    spec = DisturbanceSpec(onset=0.0, shape="table", table=table)
    pos = np.stack([x1.ravel()[:5], x2.ravel()[:5]], axis=1)
    out = eval_disturbance(spec, pos, 0.0, backend=backend)
    np.testing.assert_allclose(out[:, 0], np.sin(pos[:, 0]), atol=1e-12)
    fld = disturbance_field(spec, g, 0.0)
    assert fld is table
    with pytest.raises(InvalidParameter):
        disturbance_field(spec, GridSpec(2, 32), 0.0)


def test_disturbance_validation():
    with pytest.raises(InvalidParameter):
        DisturbanceSpec(shape="ramp")
    with pytest.raises(InvalidParameter):
        DisturbanceSpec(shape="table")


def test_repulsion_disperses_cluster(backend):
    """A tight cluster spreads out: mean nearest-neighbor spacing grows."""
    rng = np.random.default_rng(11)
    pos = 0.1 * rng.standard_normal((30, 2))
    state = AgentState(pos)
    d0 = mean_nearest_neighbor_distance(state)
    spec = KernelSpec(strength=0.5, length_scale=0.5)
    for _ in range(200):
        v = pairwise_velocity(state, spec, backend=backend)
        state = euler_step(state, v, 0.01)
    d1 = mean_nearest_neighbor_distance(state)
    assert d1 > 3.0 * d0
