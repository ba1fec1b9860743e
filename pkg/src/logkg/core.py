"""Periodic 1D grids, discrete norms, and finite-difference operators.

A "field" is one time level of grid values: a plain float64 array of length
``grid.n_points``.  Index ``N`` is identified with index ``0``, so periodicity
is a property of the indexing and never of stored ghost entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid1D",
    "TimeMesh",
    "ErrorReport",
    "as_field",
    "forward_diff",
    "second_diff",
    "inner",
    "norm_l2",
    "norm_linf",
    "error_report",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic mesh on ``[a, b)``: ``x_j = a + j*h`` with ``h = (b-a)/N``."""

    a: float
    b: float
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.b > self.a):
            raise ValueError("grid endpoints must be finite with b > a")
        n = self.n_points
        if int(n) != n or n < 4:
            raise ValueError("n_points must be an integer >= 4")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "n_points", int(n))

    @classmethod
    def from_spacing(cls, a, b, spacing):
        """Build the grid whose spacing equals ``spacing`` up to round-off."""
        if spacing <= 0:
            raise ValueError("spacing must be positive")
        n = round((b - a) / spacing)
        grid = cls(a, b, n)
        if abs(grid.spacing - spacing) > 1e-9 * spacing:
            raise ValueError(f"spacing {spacing!r} does not evenly divide [{a}, {b}]")
        return grid

    @property
    def spacing(self) -> float:
        return (self.b - self.a) / self.n_points

    @property
    def x(self) -> np.ndarray:
        """Grid point coordinates ``x_0 .. x_{N-1}``."""
        return self.a + self.spacing * np.arange(self.n_points)


@dataclass(frozen=True)
class TimeMesh:
    """Uniform time levels ``t_n = n*tau`` for ``n = 0 .. n_steps``."""

    tau: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError("tau must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_final_time(cls, tau, final_time):
        """Mesh reaching ``final_time``; ``final_time/tau`` must be an integer
        to within relative 1e-12."""
        if tau <= 0:
            raise ValueError("tau must be positive")
        if final_time <= 0:
            raise ValueError("final_time must be positive")
        n = round(final_time / tau)
        if n < 1 or abs(n * tau - final_time) > 1e-12 * max(1.0, abs(final_time)):
            raise ValueError(
                f"final_time {final_time!r} is not an integer multiple of tau {tau!r}"
            )
        return cls(tau, n)

    @property
    def final_time(self) -> float:
        return self.n_steps * self.tau


@dataclass(frozen=True)
class ErrorReport:
    """Discrete l2 / l-infinity / H1 norms of a field difference."""

    l2: float
    linf: float
    h1: float


def as_field(values, grid=None) -> np.ndarray:
    """Coerce ``values`` to a contiguous float64 field, optionally checking
    its length against ``grid``."""
    u = np.ascontiguousarray(values, dtype=np.float64)
    if u.ndim != 1:
        raise ValueError("a field must be one-dimensional")
    if grid is not None and u.shape[0] != grid.n_points:
        raise ValueError(
            f"field length {u.shape[0]} does not match grid with {grid.n_points} points"
        )
    return u


def _require_finite(u):
    if not np.all(np.isfinite(u)):
        raise ValueError("field contains non-finite entries")


def forward_diff(u, grid) -> np.ndarray:
    """One-sided difference ``(u[j+1] - u[j]) / h`` with periodic wrap."""
    u = as_field(u, grid)
    return (np.roll(u, -1) - u) / grid.spacing


def second_diff(u, grid) -> np.ndarray:
    """Centered second difference ``(u[j+1] - 2 u[j] + u[j-1]) / h^2`` with
    periodic wrap."""
    u = as_field(u, grid)
    return (np.roll(u, -1) - 2.0 * u + np.roll(u, 1)) / grid.spacing**2


def inner(u, v, grid) -> float:
    """Weighted inner product ``h * sum_j u_j v_j``."""
    u = as_field(u, grid)
    v = as_field(v, grid)
    return float(grid.spacing * np.dot(u, v))


def norm_l2(u, grid) -> float:
    """Grid-weighted l2 norm ``sqrt(h * sum_j u_j^2)``."""
    u = as_field(u, grid)
    _require_finite(u)
    return math.sqrt(grid.spacing * float(np.dot(u, u)))


def norm_linf(u) -> float:
    """Maximum absolute entry."""
    u = as_field(u)
    _require_finite(u)
    return float(np.max(np.abs(u)))


def error_report(numeric, reference, grid) -> ErrorReport:
    """Norms of ``numeric - reference``; the H1 norm combines the l2 norm with
    the one-sided difference seminorm of the difference."""
    diff = as_field(numeric, grid) - as_field(reference, grid)
    _require_finite(diff)
    l2 = norm_l2(diff, grid)
    linf = norm_linf(diff)
    h1 = math.sqrt(l2 * l2 + norm_l2(forward_diff(diff, grid), grid) ** 2)
    return ErrorReport(l2, linf, h1)
