# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Must mirror reference.py to floating round-off."""

import numpy as np

from libc.math cimport exp, floor, fabs

NAME = "compiled"

cdef double TWO_PI = 6.283185307179586476925286766559
cdef double PI = 3.1415926535897932384626433832795


cdef inline double _wrap(double u) noexcept nogil:
    return u - TWO_PI * floor((u + PI) / TWO_PI)


def pairwise_velocities(pos_in, double strength, double length_scale, double delta):
    pos_arr = np.ascontiguousarray(pos_in, dtype=np.float64)
    cdef const double[:, ::1] pos = pos_arr
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t d = pos.shape[1]
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double inv2l2 = 1.0 / (2.0 * length_scale * length_scale)
    cdef bint limited = delta > 0.0
    cdef double d2max = delta * delta
    cdef Py_ssize_t i, k
    cdef double dz0, dz1, r2, w, acc0, acc1
    with nogil:
        if d == 1:
            for i in range(n):
                acc0 = 0.0
                for k in range(n):
                    dz0 = _wrap(pos[i, 0] - pos[k, 0])
                    r2 = dz0 * dz0
                    if limited and r2 > d2max:
                        continue
                    acc0 += strength * exp(-r2 * inv2l2) * dz0
                out[i, 0] = acc0
        else:
            for i in range(n):
                acc0 = 0.0
                acc1 = 0.0
                for k in range(n):
                    dz0 = _wrap(pos[i, 0] - pos[k, 0])
                    dz1 = _wrap(pos[i, 1] - pos[k, 1])
                    r2 = dz0 * dz0 + dz1 * dz1
                    if limited and r2 > d2max:
                        continue
                    w = strength * exp(-r2 * inv2l2)
                    acc0 += w * dz0
                    acc1 += w * dz1
                out[i, 0] = acc0
                out[i, 1] = acc1
    return out_arr


cdef void _axis_weights(const double[::1] coords, double p, double inv2s2, double h,
                        double[::1] w) noexcept nogil:
    cdef Py_ssize_t nc = coords.shape[0]
    cdef Py_ssize_t j
    cdef int image
    cdef double diff, u, s, total, norm
    total = 0.0
    for j in range(nc):
        diff = coords[j] - p
        s = 0.0
        for image in range(-3, 4):
            u = diff + TWO_PI * image
            s += exp(-u * u * inv2s2)
        w[j] = s
        total += s
    norm = 1.0 / (total * h)
    for j in range(nc):
        w[j] *= norm


def kde_field(pos_in, double sigma, double mass, int n, double h, coords_in):
    pos_arr = np.ascontiguousarray(pos_in, dtype=np.float64)
    coords_arr = np.ascontiguousarray(coords_in, dtype=np.float64)
    cdef const double[:, ::1] pos = pos_arr
    cdef const double[::1] coords = coords_arr
    cdef Py_ssize_t n_agents = pos.shape[0]
    cdef Py_ssize_t d = pos.shape[1]
    cdef double inv2s2 = 1.0 / (2.0 * sigma * sigma)
    cdef Py_ssize_t a, i, j
    cdef double wi
    w1_arr = np.empty(n, dtype=np.float64)
    w2_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] w1 = w1_arr
    cdef double[::1] w2 = w2_arr
    if d == 1:
        out1_arr = np.zeros(n, dtype=np.float64)
        out1 = out1_arr
        _kde_1d(pos, coords, inv2s2, mass, h, w1, out1)
        return out1_arr
    out2_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] out2 = out2_arr
    with nogil:
        for a in range(n_agents):
            _axis_weights(coords, pos[a, 0], inv2s2, h, w1)
            _axis_weights(coords, pos[a, 1], inv2s2, h, w2)
            for i in range(n):
                wi = mass * w1[i]
                for j in range(n):
                    out2[i, j] += wi * w2[j]
    return out2_arr


cdef void _kde_1d(const double[:, ::1] pos, const double[::1] coords, double inv2s2,
                  double mass, double h, double[::1] w,
                  double[::1] out) noexcept nogil:
    cdef Py_ssize_t n_agents = pos.shape[0]
    cdef Py_ssize_t n = coords.shape[0]
    cdef Py_ssize_t a, i
    for a in range(n_agents):
        _axis_weights(coords, pos[a, 0], inv2s2, h, w)
        for i in range(n):
            out[i] += mass * w[i]


def rusanov_transport(rho_in, velocities, double dt, double h):
    rho_arr = np.ascontiguousarray(rho_in, dtype=np.float64)
    if rho_arr.ndim == 1:
        return _rusanov_1d(rho_arr,
                           np.ascontiguousarray(velocities[0], dtype=np.float64),
                           dt, h)
    return _rusanov_2d(rho_arr,
                       np.ascontiguousarray(velocities[0], dtype=np.float64),
                       np.ascontiguousarray(velocities[1], dtype=np.float64),
                       dt, h)


def _rusanov_1d(const double[::1] rho, const double[::1] v, double dt, double h):
    cdef Py_ssize_t n = rho.shape[0]
    flux_arr = np.empty(n, dtype=np.float64)
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] flux = flux_arr
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, r
    cdef double vl, vr, a
    with nogil:
        for i in range(n):
            r = i + 1 if i + 1 < n else 0
            vl = v[i]
            vr = v[r]
            a = fabs(vl) if fabs(vl) > fabs(vr) else fabs(vr)
            flux[i] = 0.5 * (rho[i] * vl + rho[r] * vr) - 0.5 * a * (rho[r] - rho[i])
        for i in range(n):
            r = i - 1 if i > 0 else n - 1
            out[i] = rho[i] - (dt / h) * (flux[i] - flux[r])
    return out_arr


def _rusanov_2d(const double[:, ::1] rho, const double[:, ::1] v0, const double[:, ::1] v1,
                double dt, double h):
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t m = rho.shape[1]
    f0_arr = np.empty((n, m), dtype=np.float64)
    f1_arr = np.empty((n, m), dtype=np.float64)
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] f0 = f0_arr
    cdef double[:, ::1] f1 = f1_arr
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, r
    cdef double vl, vr, a
    with nogil:
        for i in range(n):
            r = i + 1 if i + 1 < n else 0
            for j in range(m):
                vl = v0[i, j]
                vr = v0[r, j]
                a = fabs(vl) if fabs(vl) > fabs(vr) else fabs(vr)
                f0[i, j] = 0.5 * (rho[i, j] * vl + rho[r, j] * vr) \
                    - 0.5 * a * (rho[r, j] - rho[i, j])
        for i in range(n):
            for j in range(m):
                r = j + 1 if j + 1 < m else 0
                vl = v1[i, j]
                vr = v1[i, r]
                a = fabs(vl) if fabs(vl) > fabs(vr) else fabs(vr)
                f1[i, j] = 0.5 * (rho[i, j] * vl + rho[i, r] * vr) \
                    - 0.5 * a * (rho[i, r] - rho[i, j])
        for i in range(n):
            for j in range(m):
                out[i, j] = rho[i, j] - (dt / h) * (
                    f0[i, j] - f0[i - 1 if i > 0 else n - 1, j]
                    + f1[i, j] - f1[i, j - 1 if j > 0 else m - 1]
                )
    return out_arr


def bilinear_sample(values_in, pos_in, double h, int d):
    values_arr = np.ascontiguousarray(values_in, dtype=np.float64)
    pos_arr = np.ascontiguousarray(pos_in, dtype=np.float64)
    cdef const double[:, ::1] pos = pos_arr
    cdef Py_ssize_t n_agents = pos.shape[0]
    out_arr = np.empty(n_agents, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t n = values_arr.shape[0]
    cdef const double[::1] v1
    cdef const double[:, ::1] v2
    cdef Py_ssize_t k, a0, a1, b0, b1
    cdef double s, t, u
    if d == 1:
        v1 = values_arr
        with nogil:
            for k in range(n_agents):
                s = (pos[k, 0] + PI) / h - 0.5
                a0 = <Py_ssize_t> floor(s)
                t = s - a0
                a0 = a0 % n
                if a0 < 0:
                    a0 += n
                a1 = (a0 + 1) % n
                out[k] = v1[a0] * (1.0 - t) + v1[a1] * t
        return out_arr
    v2 = values_arr
    with nogil:
        for k in range(n_agents):
            s = (pos[k, 0] + PI) / h - 0.5
            a0 = <Py_ssize_t> floor(s)
            t = s - a0
            a0 = a0 % n
            if a0 < 0:
                a0 += n
            a1 = (a0 + 1) % n
            s = (pos[k, 1] + PI) / h - 0.5
            b0 = <Py_ssize_t> floor(s)
            u = s - b0
            b0 = b0 % n
            if b0 < 0:
                b0 += n
            b1 = (b0 + 1) % n
            out[k] = (v2[a0, b0] * (1.0 - t) * (1.0 - u)
                      + v2[a1, b0] * t * (1.0 - u)
                      + v2[a0, b1] * (1.0 - t) * u
                      + v2[a1, b1] * t * u)
    return out_arr
