"""Benchmark problems, the traveling-Gausson closed form, and an independent
PDE-residual oracle.

Both stock problems live on ``[-16, 16]`` with periodic boundary conditions;
their initial data decays far below round-off at the boundary, which is what
makes the periodic truncation of the whole-line problem legitimate.  The
traveling wave moves at speed ``c/k``, so runs much longer than ``T ~ 6``
let it reach the boundary and leave the verified regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import as_field

__all__ = [
    "ProblemSpec",
    "example1_exact",
    "traveling_gausson",
    "even_bump",
    "get_problem",
    "PROBLEM_NAMES",
    "sample_initial_data",
    "pde_residual",
]

# Initial data must be at most this large on the grid points adjacent to the
# domain boundary for the periodic truncation to be faithful.
BOUNDARY_TAIL_LIMIT = 1e-12


@dataclass(frozen=True)
class ProblemSpec:
    """Initial data (and, when available, the exact solution) of a benchmark."""

    name: str
    phi: Callable[[np.ndarray], np.ndarray]
    gamma: Callable[[np.ndarray], np.ndarray]
    domain: tuple[float, float]
    exact: Callable[[np.ndarray, float], np.ndarray] | None = None
    wave_params: tuple[float, float] | None = None  # (c, k)


def example1_exact(x, t, c=2.0, k=1.0):
    """Gaussian solitary wave ``exp(-(k x - c t)^2 / (2 (c^2 - k^2)))``.

    An exact solution of the unregularized equation for ``lam = 1``;
    requires ``c^2 > k^2``.
    """
    if not c * c > k * k:
        raise ValueError("wave parameters require c^2 > k^2")
    x = np.asarray(x, dtype=np.float64)
    out = np.exp(-((k * x - c * t) ** 2) / (2.0 * (c * c - k * k)))
    return float(out) if out.ndim == 0 else out


def _example1_gamma(x, c, k):
    # time derivative of the traveling wave at t = 0
    x = np.asarray(x, dtype=np.float64)
    out = (c * k * x / (c * c - k * k)) * example1_exact(x, 0.0, c, k)
    return float(out) if out.ndim == 0 else out


def traveling_gausson(c=2.0, k=1.0, domain=(-16.0, 16.0)) -> ProblemSpec:
    """Benchmark with the exact Gaussian traveling wave (``example1``)."""
    if not c * c > k * k:
        raise ValueError("wave parameters require c^2 > k^2")
    return ProblemSpec(
        name="example1",
        phi=lambda x: example1_exact(x, 0.0, c, k),
        gamma=lambda x: _example1_gamma(x, c, k),
        domain=(float(domain[0]), float(domain[1])),
        exact=lambda x, t: example1_exact(x, t, c, k),
        wave_params=(float(c), float(k)),
    )


def _bump_phi(x):
    x = np.asarray(x, dtype=np.float64)
    out = 2.0 / (np.exp(-x * x) + np.exp(x * x))
    return float(out) if out.ndim == 0 else out


def even_bump(domain=(-16.0, 16.0)) -> ProblemSpec:
    """Even, rapidly decaying bump with zero initial velocity (``example2``);
    no closed-form solution."""
    return ProblemSpec(
        name="example2",
        phi=_bump_phi,
        gamma=lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
        domain=(float(domain[0]), float(domain[1])),
    )


PROBLEM_NAMES = ("example1", "example2")


def get_problem(name) -> ProblemSpec:
    key = str(name).lower()
    if key == "example1":
        return traveling_gausson()
    if key == "example2":
        return even_bump()
    raise ValueError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}")


def sample_initial_data(spec, grid):
    """Pointwise samples of the initial value and velocity on ``grid``.

    Rejects grids that stick out of the problem domain and initial data whose
    boundary-adjacent values exceed ``BOUNDARY_TAIL_LIMIT`` (the periodic
    truncation would then be audible in the solution).
    """
    a, b = spec.domain
    span = b - a
    if grid.a < a - 1e-12 * span or grid.b > b + 1e-12 * span:
        raise ValueError(f"grid [{grid.a}, {grid.b}] not inside problem domain [{a}, {b}]")
    phi = as_field(spec.phi(grid.x), grid)
    gamma = as_field(spec.gamma(grid.x), grid)
    for name, field in (("phi", phi), ("gamma", gamma)):
        edge = max(abs(field[0]), abs(field[-1]))
        if edge > BOUNDARY_TAIL_LIMIT:
            raise ValueError(
                f"initial {name} is {edge:.3g} next to the domain boundary; "
                f"periodic truncation requires <= {BOUNDARY_TAIL_LIMIT:g}"
            )
    return phi, gamma


def pde_residual(u_fn, x, t, epsilon=0.0, lam=1.0, probe=1e-3):
    """Residual of ``u_tt - u_xx + u + lam*u*ln(eps^2 + u^2)`` at ``(x, t)``.

    Second derivatives are evaluated with 4th-order centered stencils of
    spacing ``probe``, so the oracle is strictly more accurate than the
    2nd-order schemes it validates: for an exact solution the residual
    vanishes at rate ``probe^4``.  With ``epsilon = 0`` the unregularized
    logarithm is used, which requires ``u(x, t) != 0``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if probe <= 0:
        raise ValueError("probe must be positive")
    d = probe
    u0 = float(u_fn(x, t))

    def dd(values):
        m2, m1, p1, p2 = values
        return (-p2 + 16.0 * p1 - 30.0 * u0 + 16.0 * m1 - m2) / (12.0 * d * d)

    utt = dd([float(u_fn(x, t - 2 * d)), float(u_fn(x, t - d)),
              float(u_fn(x, t + d)), float(u_fn(x, t + 2 * d))])
    uxx = dd([float(u_fn(x - 2 * d, t)), float(u_fn(x - d, t)),
              float(u_fn(x + d, t)), float(u_fn(x + 2 * d, t))])
    if epsilon == 0.0:
        if u0 == 0.0:
            raise ValueError("epsilon = 0 requires u(x, t) != 0 at the probe point")
        log_term = math.log(u0 * u0)
    else:
        log_term = math.log(epsilon * epsilon + u0 * u0)
    return utt - uxx + u0 + lam * u0 * log_term
