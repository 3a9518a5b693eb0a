"""Pure numpy implementations of the hot kernels.

These are the reference semantics; the compiled extension in _core.pyx must
reproduce them to floating round-off. Shapes: positions (N, d) with d in
{1, 2}, density/velocity arrays (n,)*d.
"""

import math

import numpy as np

TWO_PI = 2.0 * math.pi

NAME = "python"

# row block size bounding the (block, N, d) scratch in pairwise sums
_BLOCK = 512


def _wrap(u):
    return u - TWO_PI * np.floor((u + math.pi) / TWO_PI)


def pairwise_velocities(pos, strength, length_scale, delta):
    """Direct-sum interaction velocities for the repulsive Gaussian family.

    f(z) = strength * z * exp(-|z|^2 / (2 length_scale^2)) on wrapped
    displacements z = pos_i - pos_k. delta <= 0 means unlimited range;
    otherwise pairs beyond |z|_2 > delta are dropped.
    """
    pos = np.asarray(pos, dtype=float)
    n_agents = pos.shape[0]
    out = np.empty_like(pos)
    inv2l2 = 1.0 / (2.0 * length_scale * length_scale)
    d2max = delta * delta if delta > 0.0 else math.inf
    for start in range(0, n_agents, _BLOCK):
        stop = min(start + _BLOCK, n_agents)
        dz = _wrap(pos[start:stop, None, :] - pos[None, :, :])
        r2 = np.sum(dz * dz, axis=-1)
        w = strength * np.exp(-r2 * inv2l2)
        if delta > 0.0:
            w = np.where(r2 <= d2max, w, 0.0)
        out[start:stop] = np.einsum("ik,ikd->id", w, dz)
    return out


def kde_weights_1d(coords, samples, sigma, h):
    """Per-sample wrapped-Gaussian weights on one axis, unit grid integral.

    The periodic sum is truncated at 3 images per side. Each row is
    normalized so that sum(row) * h == 1 exactly (up to round-off), which
    makes the resulting product-kernel density integrate to the sample mass
    regardless of bandwidth.
    """
    diff = coords[None, :] - samples[:, None]
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    w = np.zeros_like(diff)
    for image in range(-3, 4):
        u = diff + TWO_PI * image
        w += np.exp(-u * u * inv2s2)
    w /= w.sum(axis=1, keepdims=True) * h
    return w


def kde_field(pos, sigma, mass, n, h, coords):
    """Kernel density estimate of the agent cloud on the grid."""
    pos = np.asarray(pos, dtype=float)
    d = pos.shape[1]
    if d == 1:
        w = kde_weights_1d(coords, pos[:, 0], sigma, h)
        return mass * w.sum(axis=0)
    w1 = kde_weights_1d(coords, pos[:, 0], sigma, h)
    w2 = kde_weights_1d(coords, pos[:, 1], sigma, h)
    return mass * np.einsum("ai,aj->ij", w1, w2)


def rusanov_transport(rho, velocities, dt, h):
    """One conservative local Lax-Friedrichs (Rusanov) transport update.

    Face flux between cells L,R along each axis:
        F = 0.5 * (rho_L v_L + rho_R v_R) - 0.5 * max(|v_L|, |v_R|) * (rho_R - rho_L)
    """
    out = np.array(rho, dtype=float, copy=True)
    for axis, v in enumerate(velocities):
        rho_r = np.roll(rho, -1, axis=axis)
        v_r = np.roll(v, -1, axis=axis)
        flux = 0.5 * (rho * v + rho_r * v_r) - 0.5 * np.maximum(
            np.abs(v), np.abs(v_r)
        ) * (rho_r - rho)
        out -= (dt / h) * (flux - np.roll(flux, 1, axis=axis))
    return out


def bilinear_sample(values, pos, h, d):
    """Periodic bilinear interpolation of a grid field at agent positions."""
    pos = np.asarray(pos, dtype=float)
    n = values.shape[0]
    # fractional cell index relative to the first center at -pi + h/2
    s = (pos + math.pi) / h - 0.5
    i0 = np.floor(s).astype(np.int64)
    frac = s - i0
    i0 = np.mod(i0, n)
    i1 = np.mod(i0 + 1, n)
    if d == 1:
        a, t = i0[:, 0], frac[:, 0]
        return values[a] * (1.0 - t) + values[i1[:, 0]] * t
    a0, b0 = i0[:, 0], i0[:, 1]
    a1, b1 = i1[:, 0], i1[:, 1]
    t, u = frac[:, 0], frac[:, 1]
    return (
        values[a0, b0] * (1.0 - t) * (1.0 - u)
        + values[a1, b0] * t * (1.0 - u)
        + values[a0, b1] * (1.0 - t) * u
        + values[a1, b1] * t * u
    )
