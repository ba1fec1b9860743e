# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-stepping kernels.

Same contract as ``logkg.kernels._fallback``: the advance functions update
the ``(u_prev, u_curr)`` pair in place and return ``(completed, amp_max)``.
The arithmetic mirrors the fallback expressions term by term and the build
disables FMA contraction, so the backends agree bit for bit on the explicit
scheme and to solver round-off on the semi-implicit one.
"""

from libc.math cimport isfinite, log
from libc.string cimport memcpy

import numpy as np

__all__ = ["efd_advance", "sifd_factor", "sifd_advance"]


cdef void _restore(double* buf0, double* buf1, double* buf2,
                   Py_ssize_t rot, Py_ssize_t n) noexcept nogil:
    # After ``rot`` cyclic rotations of (a, b, c) over the three buffers the
    # levels (n-1, n) live in buffers (rot%3, (rot+1)%3); move them back into
    # (buf0, buf1).  The orders below never clobber content still needed.
    cdef Py_ssize_t phase = rot % 3
    if phase == 1:      # levels in (buf1, buf2)
        memcpy(buf0, buf1, n * sizeof(double))
        memcpy(buf1, buf2, n * sizeof(double))
    elif phase == 2:    # levels in (buf2, buf0)
        memcpy(buf1, buf0, n * sizeof(double))
        memcpy(buf0, buf2, n * sizeof(double))


def efd_advance(double[::1] u_prev, double[::1] u_curr, Py_ssize_t n_steps,
                double tau, double h, double eps, double lam):
    """Advance the explicit scheme ``n_steps`` times in place."""
    cdef Py_ssize_t n = u_curr.shape[0]
    if u_prev.shape[0] != n:
        raise ValueError("u_prev and u_curr must have the same length")
    scratch = np.empty(n, dtype=np.float64)
    cdef double[::1] sview = scratch
    cdef double* buf0 = &u_prev[0]
    cdef double* buf1 = &u_curr[0]
    cdef double* buf2 = &sview[0]
    cdef double* a = buf0
    cdef double* b = buf1
    cdef double* c = buf2
    cdef double* tmp
    cdef double t2 = tau * tau
    cdef double ih2 = 1.0 / (h * h)
    cdef double e2 = eps * eps
    cdef double amp = 0.0
    cdef double step_amp, v, un, lap
    cdef Py_ssize_t step, j, jp, jm
    cdef Py_ssize_t completed = n_steps
    cdef Py_ssize_t rot = 0
    with nogil:
        for step in range(n_steps):
            step_amp = 0.0
            for j in range(n):
                jp = j + 1 if j + 1 < n else 0
                jm = j - 1 if j >= 1 else n - 1
                un = b[j]
                lap = b[jp] - 2.0 * un + b[jm]
                v = (2.0 * un - a[j]) + t2 * ((lap * ih2 - un) - (lam * un) * log(e2 + un * un))
                if not isfinite(v):
                    completed = step
                    break
                c[j] = v
                if v < 0.0:
                    v = -v
                if v > step_amp:
                    step_amp = v
            if completed != n_steps:
                break
            if step_amp > amp:
                amp = step_amp
            tmp = a; a = b; b = c; c = tmp
            rot += 1
        _restore(buf0, buf1, buf2, rot, n)
    return completed, amp


def sifd_factor(Py_ssize_t n_points, double tau, double h):
    """Factor the periodic tridiagonal matrix of the semi-implicit scheme.

    The cyclic matrix (diagonal ``d = 1/tau^2 + 1/2 + 1/h^2``, off-diagonal
    and corners ``o = -1/(2 h^2)``) is reduced to an ordinary symmetric
    tridiagonal matrix plus a rank-one correction; the Thomas elimination
    coefficients and the correction vector are computed once per run.
    """
    cdef Py_ssize_t n = n_points
    if n < 4:
        raise ValueError("need at least 4 points")
    cdef double d = 1.0 / (tau * tau) + 0.5 + 1.0 / (h * h)
    cdef double o = -0.5 / (h * h)
    inv_denom = np.empty(n, dtype=np.float64)
    cp = np.zeros(n, dtype=np.float64)
    z = np.empty(n, dtype=np.float64)
    cdef double[::1] idv = inv_denom
    cdef double[::1] cpv = cp
    cdef double[::1] zv = z
    cdef double diag_last = d + (o * o) / d
    cdef double m = 2.0 * d
    cdef Py_ssize_t i
    idv[0] = 1.0 / m
    cpv[0] = o * idv[0]
    for i in range(1, n - 1):
        m = d - o * cpv[i - 1]
        idv[i] = 1.0 / m
        cpv[i] = o * idv[i]
    m = diag_last - o * cpv[n - 2]
    idv[n - 1] = 1.0 / m

    # z = B^{-1} u with u = (-d, 0, ..., 0, o)
    zv[0] = -d * idv[0]
    for i in range(1, n - 1):
        zv[i] = (-o * zv[i - 1]) * idv[i]
    zv[n - 1] = (o - o * zv[n - 2]) * idv[n - 1]
    for i in range(n - 2, -1, -1):
        zv[i] = zv[i] - cpv[i] * zv[i + 1]

    cdef double vn = -o / d
    cdef double s = 1.0 + zv[0] + vn * zv[n - 1]
    return (inv_denom, cp, z, s, vn, o)


def sifd_advance(double[::1] u_prev, double[::1] u_curr, Py_ssize_t n_steps,
                 double tau, double h, double eps, double lam, factor):
    """Advance the semi-implicit scheme ``n_steps`` times in place."""
    cdef Py_ssize_t n = u_curr.shape[0]
    if u_prev.shape[0] != n:
        raise ValueError("u_prev and u_curr must have the same length")
    inv_denom_arr, cp_arr, z_arr, s_obj, vn_obj, o_obj = factor
    cdef double[::1] idv = inv_denom_arr
    cdef double[::1] cpv = cp_arr
    cdef double[::1] zv = z_arr
    cdef double s = s_obj
    cdef double vn = vn_obj
    cdef double o = o_obj
    if idv.shape[0] != n:
        raise ValueError("factor size does not match the field length")
    scratch = np.empty(n, dtype=np.float64)
    work = np.empty(n, dtype=np.float64)
    cdef double[::1] sview = scratch
    cdef double[::1] wview = work
    cdef double* buf0 = &u_prev[0]
    cdef double* buf1 = &u_curr[0]
    cdef double* buf2 = &sview[0]
    cdef double* w = &wview[0]
    cdef double* a = buf0
    cdef double* b = buf1
    cdef double* c = buf2
    cdef double* tmp
    cdef double it2 = 1.0 / (tau * tau)
    cdef double ih2 = 1.0 / (h * h)
    cdef double e2 = eps * eps
    cdef double amp = 0.0
    cdef double step_amp, v, lap, corr, an, bn
    cdef Py_ssize_t step, j, jp, jm
    cdef Py_ssize_t completed = n_steps
    cdef Py_ssize_t rot = 0
    cdef bint bad
    with nogil:
        for step in range(n_steps):
            # right-hand side from the two known levels
            for j in range(n):
                jp = j + 1 if j + 1 < n else 0
                jm = j - 1 if j >= 1 else n - 1
                an = a[j]
                bn = b[j]
                lap = a[jp] - 2.0 * an + a[jm]
                w[j] = (2.0 * bn - an) * it2 + 0.5 * (lap * ih2 - an) \
                    - (lam * bn) * log(e2 + bn * bn)
            # Thomas sweeps on the corrected tridiagonal matrix, in place
            w[0] = w[0] * idv[0]
            for j in range(1, n):
                w[j] = (w[j] - o * w[j - 1]) * idv[j]
            for j in range(n - 2, -1, -1):
                w[j] = w[j] - cpv[j] * w[j + 1]
            # rank-one correction restores the periodic corners
            corr = (w[0] + vn * w[n - 1]) / s
            step_amp = 0.0
            bad = 0
            for j in range(n):
                v = w[j] - corr * zv[j]
                if not isfinite(v):
                    bad = 1
                    break
                c[j] = v
                if v < 0.0:
                    v = -v
                if v > step_amp:
                    step_amp = v
            if bad:
                completed = step
                break
            if step_amp > amp:
                amp = step_amp
            tmp = a; a = b; b = c; c = tmp
            rot += 1
        _restore(buf0, buf1, buf2, rot, n)
    return completed, amp
