"""NumPy/SciPy implementation of the time-stepping kernels.

This module is the import-time fallback when the compiled extension is not
available, and the ground truth the extension is tested against.  Both
backends share the same contract:

``*_advance(u_prev, u_curr, n_steps, ...) -> (completed, amp_max)``

advances the pair of time levels in place.  ``completed < n_steps`` means the
step after ``completed`` produced a non-finite value; the buffers then hold
the last finite pair.  ``amp_max`` is the largest max-norm over the accepted
new levels.
"""

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

__all__ = ["efd_advance", "sifd_factor", "sifd_advance"]


def _lap(out, b):
    out[1:-1] = b[2:] - 2.0 * b[1:-1] + b[:-2]
    out[0] = b[1] - 2.0 * b[0] + b[-1]
    out[-1] = b[0] - 2.0 * b[-1] + b[-2]


def _writeback(u_prev, u_curr, a, b):
    if a is u_prev and b is u_curr:
        return
    aa = a.copy()
    bb = b.copy()
    u_prev[:] = aa
    u_curr[:] = bb


def efd_advance(u_prev, u_curr, n_steps, tau, h, eps, lam):
    """Advance the explicit scheme ``n_steps`` times in place."""
    t2 = tau * tau
    ih2 = 1.0 / (h * h)
    e2 = eps * eps
    a = u_prev
    b = u_curr
    c = np.empty_like(b)
    lap = np.empty_like(b)
    amp = 0.0
    # divergence is detected via the finiteness check, so the float overflow
    # that precedes it is expected, not an error
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_steps):
            _lap(lap, b)
            c[:] = (2.0 * b - a) + t2 * ((lap * ih2 - b) - (lam * b) * np.log(e2 + b * b))
            m = float(np.max(np.abs(c)))
            if not np.isfinite(m):
                _writeback(u_prev, u_curr, a, b)
                return step, amp
            if m > amp:
                amp = m
            a, b, c = b, c, a
    _writeback(u_prev, u_curr, a, b)
    return n_steps, amp


class CyclicFactor:
    """Once-per-run factorization of the periodic tridiagonal system of the
    semi-implicit scheme: a banded Cholesky factor of the modified ordinary
    tridiagonal matrix plus the rank-one correction vector."""

    __slots__ = ("band", "z", "s", "o", "d")

    def __init__(self, band, z, s, o, d):
        self.band = band
        self.z = z
        self.s = s
        self.o = o
        self.d = d


def sifd_factor(n_points, tau, h):
    """Factor the cyclic tridiagonal matrix with diagonal
    ``d = 1/tau^2 + 1/2 + 1/h^2`` and off-diagonal/corner ``o = -1/(2 h^2)``.

    The periodic corners are removed by a rank-one update (the classic
    trick), leaving a symmetric, strictly diagonally dominant tridiagonal
    matrix that is Cholesky-factored once and reused every step.
    """
    n = int(n_points)
    d = 1.0 / (tau * tau) + 0.5 + 1.0 / (h * h)
    o = -0.5 / (h * h)
    diag = np.full(n, d)
    diag[0] = 2.0 * d
    diag[-1] = d + (o * o) / d
    band = np.zeros((2, n))
    band[0, 1:] = o
    band[1] = diag
    cb = cholesky_banded(band, lower=False)
    uvec = np.zeros(n)
    uvec[0] = -d
    uvec[-1] = o
    z = cho_solve_banded((cb, False), uvec)
    s = 1.0 + z[0] - (o / d) * z[-1]
    return CyclicFactor(cb, z, s, o, d)


def cyclic_solve(factor, rhs):
    """Solve the full periodic system given its factorization."""
    y = cho_solve_banded((factor.band, False), rhs)
    corr = (y[0] - (factor.o / factor.d) * y[-1]) / factor.s
    return y - corr * factor.z


def sifd_advance(u_prev, u_curr, n_steps, tau, h, eps, lam, factor):
    """Advance the semi-implicit scheme ``n_steps`` times in place."""
    it2 = 1.0 / (tau * tau)
    ih2 = 1.0 / (h * h)
    e2 = eps * eps
    a = u_prev
    b = u_curr
    lap = np.empty_like(b)
    amp = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_steps):
            _lap(lap, a)
            rhs = (2.0 * b - a) * it2 + 0.5 * (lap * ih2 - a) - (lam * b) * np.log(e2 + b * b)
            c = cyclic_solve(factor, rhs)
            m = float(np.max(np.abs(c)))
            if not np.isfinite(m):
                _writeback(u_prev, u_curr, a, b)
                return step, amp
            if m > amp:
                amp = m
            a, b = b, c
    _writeback(u_prev, u_curr, a, b)
    return n_steps, amp
