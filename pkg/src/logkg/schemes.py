"""Regularized logarithmic nonlinearity, time steppers, and stability bounds.

Two three-level schemes advance ``u_tt - u_xx + u + lam*u*ln(eps^2 + u^2) = 0``
on a periodic grid:

* ``efd`` -- fully explicit; cheapest per step, conditionally stable.
* ``sifd`` -- semi-implicit (Laplacian and linear term averaged over the
  ``n-1``/``n+1`` levels); one periodic tridiagonal solve per step, with a
  much weaker step-size restriction.

The step-size bounds come from a frozen-coefficient Fourier analysis, so for
the nonlinear problem they are advisory: ``run_simulation`` refuses clearly
violating step sizes up front (unless forced) and re-checks the bound after
the run using the realized amplitude.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import Grid1D, TimeMesh, as_field, norm_linf, second_diff

__all__ = [
    "Scheme",
    "SchemeParams",
    "SolverState",
    "StabilityReport",
    "AmplificationQuery",
    "SimulationResult",
    "Observer",
    "SnapshotRecorder",
    "StepOverflowError",
    "StabilityViolation",
    "StabilityWarning",
    "f_eps",
    "F_eps",
    "first_step",
    "initial_state",
    "step_efd",
    "step_sifd",
    "sigma_max",
    "stability_limit",
    "amplification_factor",
    "run_simulation",
]


class Scheme(enum.Enum):
    SIFD = "sifd"
    EFD = "efd"


def _as_scheme(value) -> Scheme:
    if isinstance(value, Scheme):
        return value
    return Scheme(str(value).lower())


class StepOverflowError(ArithmeticError):
    """A stepper produced a non-finite value (stability violation symptom)."""

    def __init__(self, step_index, time, amplitude_max=None):
        self.step_index = int(step_index)
        self.time = float(time)
        self.amplitude_max = amplitude_max
        super().__init__(
            f"non-finite solution at step {self.step_index} (t = {self.time:.6g})"
        )


class StabilityViolation(RuntimeError):
    """The requested step size exceeds the scheme's stability limit."""

    def __init__(self, tau, tau_limit, sigma):
        self.tau = float(tau)
        self.tau_limit = float(tau_limit)
        self.sigma = float(sigma)
        super().__init__(
            f"tau = {self.tau:.6g} exceeds the stability limit "
            f"{self.tau_limit:.6g} (sigma_max = {self.sigma:.6g})"
        )


class StabilityWarning(UserWarning):
    """Realized amplitude retroactively violates the pre-run stability bound."""


@dataclass(frozen=True)
class SchemeParams:
    """Regularization strength, nonlinearity coefficient, and scheme choice.

    ``epsilon`` must be positive: the regularization exists to remove the
    logarithmic singularity at ``u = 0``, and ``epsilon = 0`` reinstates it.
    Callers wanting the unregularized limit use a tiny ``epsilon`` instead.
    """

    epsilon: float
    lam: float = 1.0
    scheme: Scheme = Scheme.EFD

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError("epsilon must be a positive finite number")
        if not math.isfinite(self.lam):
            raise ValueError("lambda must be finite")
        object.__setattr__(self, "scheme", _as_scheme(self.scheme))


@dataclass
class SolverState:
    """Two consecutive time levels plus the running amplitude monitor."""

    step_index: int
    u_prev: np.ndarray
    u_curr: np.ndarray
    amplitude_max: float


@dataclass(frozen=True)
class StabilityReport:
    """Step-size bound for a frozen nonlinearity of size ``sigma_max``.

    ``tau_limit`` is ``None`` when the scheme is unconditionally stable in
    this regime.  ``satisfied``/``margin`` are filled in only when a concrete
    ``tau`` was supplied to :func:`stability_limit`.
    """

    sigma_max: float
    tau_limit: float | None
    satisfied: bool | None
    margin: float | None


@dataclass(frozen=True)
class AmplificationQuery:
    """One Fourier mode of the frozen-coefficient scheme."""

    alpha: float
    mode_index: int
    n_points: int
    spacing: float
    tau: float

    def __post_init__(self):
        lo = -(self.n_points // 2)
        hi = (self.n_points - 1) // 2
        if not lo <= self.mode_index <= hi:
            raise ValueError(f"mode index must lie in [{lo}, {hi}]")


def f_eps(rho, epsilon):
    """Regularized logarithm ``ln(eps^2 + rho)``; accepts scalars or arrays."""
    rho = np.asarray(rho, dtype=np.float64)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if np.any(rho < 0):
        raise ValueError("rho must be nonnegative")
    out = np.log(epsilon * epsilon + rho)
    return float(out) if out.ndim == 0 else out


def F_eps(rho, epsilon):
    """Antiderivative of :func:`f_eps` vanishing at zero:
    ``rho*ln(eps^2 + rho) + eps^2*ln(1 + rho/eps^2) - rho``."""
    rho = np.asarray(rho, dtype=np.float64)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if np.any(rho < 0):
        raise ValueError("rho must be nonnegative")
    e2 = epsilon * epsilon
    out = rho * np.log(e2 + rho) + e2 * np.log1p(rho / e2) - rho
    return float(out) if out.ndim == 0 else out


def first_step(phi, gamma, grid, tau, params) -> np.ndarray:
    """Second-order Taylor start-up producing the level-1 field from the
    initial value and initial velocity."""
    phi = as_field(phi, grid)
    gamma = as_field(gamma, grid)
    if tau <= 0:
        raise ValueError("tau must be positive")
    accel = second_diff(phi, grid) - phi - params.lam * phi * f_eps(phi * phi, params.epsilon)
    return phi + tau * gamma + 0.5 * tau * tau * accel


def initial_state(phi, gamma, grid, tau, params) -> SolverState:
    """Level-0/level-1 state ready for the three-level recursion."""
    u0 = as_field(phi, grid).copy()
    u1 = first_step(u0, gamma, grid, tau, params)
    return SolverState(1, u0, u1, max(norm_linf(u0), norm_linf(u1)))


def _single_step(state, grid, tau, params):
    a = as_field(state.u_prev, grid).copy()
    b = as_field(state.u_curr, grid).copy()
    h = grid.spacing
    if params.scheme is Scheme.SIFD:
        factor = kernels.sifd_factor(grid.n_points, tau, h)
        done, _ = kernels.sifd_advance(a, b, 1, tau, h, params.epsilon, params.lam, factor)
    else:
        done, _ = kernels.efd_advance(a, b, 1, tau, h, params.epsilon, params.lam)
    if done < 1:
        raise StepOverflowError(state.step_index + 1, (state.step_index + 1) * tau)
    return b


def step_efd(state, grid, tau, params) -> np.ndarray:
    """One explicit step: returns the level ``n+1`` field."""
    if params.scheme is not Scheme.EFD:
        raise ValueError("step_efd requires params.scheme == Scheme.EFD")
    return _single_step(state, grid, tau, params)


def step_sifd(state, grid, tau, params) -> np.ndarray:
    """One semi-implicit step: solves the periodic tridiagonal system for the
    level ``n+1`` field (direct factorization, no iteration)."""
    if params.scheme is not Scheme.SIFD:
        raise ValueError("step_sifd requires params.scheme == Scheme.SIFD")
    return _single_step(state, grid, tau, params)


def sigma_max(epsilon, amplitude_max) -> float:
    """Largest magnitude the frozen logarithmic coefficient can attain for
    amplitudes up to ``amplitude_max``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if amplitude_max < 0:
        raise ValueError("amplitude_max must be nonnegative")
    e2 = epsilon * epsilon
    return max(abs(math.log(e2)), abs(math.log(e2 + amplitude_max * amplitude_max)))


def stability_limit(params, grid, sigma, tau=None) -> StabilityReport:
    """Step-size limit for a frozen nonlinearity of size ``sigma``.

    The semi-implicit scheme is unconditionally stable for ``sigma <= 1``
    and limited by ``2/sqrt(sigma - 1)`` beyond; the explicit scheme is
    limited by ``2h/sqrt((sigma + 1) h^2 + 4)``.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if params.scheme is Scheme.SIFD:
        limit = None if sigma <= 1.0 else 2.0 / math.sqrt(sigma - 1.0)
    else:
        h = grid.spacing
        limit = 2.0 * h / math.sqrt((sigma + 1.0) * h * h + 4.0)
    if tau is None:
        satisfied = True if limit is None else None
        margin = None
    else:
        satisfied = limit is None or tau <= limit
        margin = None if limit is None else limit / tau
    return StabilityReport(float(sigma), limit, satisfied, margin)


def amplification_factor(query, scheme):
    """Fourier symbol of the frozen-coefficient scheme.

    Returns ``(theta, xi_modulus)`` where the amplification roots solve
    ``xi^2 - 2*theta*xi + 1 = 0``; the max root modulus is 1 when
    ``|theta| <= 1`` and larger otherwise.  Diagnostic only -- the steppers
    never consult it.
    """
    scheme = _as_scheme(scheme)
    s = (2.0 / query.spacing) * math.sin(query.mode_index * math.pi / query.n_points)
    s2 = s * s
    t2 = query.tau * query.tau
    if scheme is Scheme.SIFD:
        theta = (2.0 - query.alpha * t2) / (2.0 + t2 * (s2 + 1.0))
    else:
        theta = (2.0 - t2 * (1.0 + query.alpha + s2)) / 2.0
    if abs(theta) <= 1.0:
        xi = 1.0
    else:
        xi = abs(theta) + math.sqrt(theta * theta - 1.0)
    return theta, xi


class Observer:
    """Trajectory callback.  ``due_after(n)`` names the next step index after
    ``n`` at which the observer wants to see the state; the driver also calls
    every observer once right after initialization (state holds levels 0/1).
    """

    def due_after(self, step_index: int) -> int:
        return step_index + 1

    def __call__(self, state):  # pragma: no cover - interface
        raise NotImplementedError


_NEVER = 2**62


class SnapshotRecorder(Observer):
    """Captures copies of the solution at fixed times (integer multiples of
    ``tau`` to within relative 1e-12)."""

    def __init__(self, times, tau):
        pending = {}
        for t in times:
            k = round(t / tau)
            if k < 0 or abs(k * tau - t) > 1e-12 * max(1.0, abs(t)):
                raise ValueError(
                    f"snapshot time {t!r} is not an integer multiple of tau {tau!r}"
                )
            pending[int(k)] = float(t)
        self._pending = pending
        self.fields: dict[float, np.ndarray] = {}

    def due_after(self, step_index):
        later = [k for k in self._pending if k > step_index]
        return min(later) if later else _NEVER

    def __call__(self, state):
        n = state.step_index
        if n - 1 in self._pending:  # only reachable at the initialization call
            self.fields[self._pending.pop(n - 1)] = state.u_prev.copy()
        if n in self._pending:
            self.fields[self._pending.pop(n)] = state.u_curr.copy()

    def at(self, time) -> np.ndarray:
        for t, f in self.fields.items():
            if abs(t - time) <= 1e-12 * max(1.0, abs(time)):
                return f
        raise KeyError(f"no snapshot recorded at t = {time!r}")


@dataclass
class SimulationResult:
    """Final state plus the pre-run and post-hoc stability verdicts."""

    state: SolverState
    pre_check: StabilityReport
    post_check: StabilityReport
    post_ok: bool


# Safety factor applied to the initial amplitude for the pre-run stability
# check; the trajectory amplitude is not known before the run.
_PRE_RUN_AMPLITUDE_FACTOR = 1.2


def run_simulation(phi, gamma, grid, mesh, params, observers=(), *, force=False) -> SimulationResult:
    """Drive a full trajectory: start-up step, then the selected scheme up to
    ``mesh.final_time``.

    The pre-run stability check uses the initial amplitude times a safety
    factor; clear violations raise :class:`StabilityViolation` unless
    ``force`` is set.  After the run the bound is re-evaluated with the
    realized amplitude; a retroactive violation produces a
    :class:`StabilityWarning`, not an error, because the bound comes from a
    frozen-coefficient linearization and is advisory for the nonlinear
    problem.
    """
    if not isinstance(grid, Grid1D) or not isinstance(mesh, TimeMesh):
        raise TypeError("run_simulation needs a Grid1D and a TimeMesh")
    phi = as_field(phi, grid)
    gamma = as_field(gamma, grid)
    tau = mesh.tau
    h = grid.spacing

    state = initial_state(phi, gamma, grid, tau, params)
    pre_sigma = sigma_max(params.epsilon, _PRE_RUN_AMPLITUDE_FACTOR * norm_linf(phi))
    pre = stability_limit(params, grid, pre_sigma, tau)
    if pre.satisfied is False and not force:
        raise StabilityViolation(tau, pre.tau_limit, pre_sigma)

    observers = tuple(observers)
    for obs in observers:
        obs(state)

    if params.scheme is Scheme.SIFD:
        factor = kernels.sifd_factor(grid.n_points, tau, h)

        def advance(a, b, k):
            return kernels.sifd_advance(a, b, k, tau, h, params.epsilon, params.lam, factor)

    else:

        def advance(a, b, k):
            return kernels.efd_advance(a, b, k, tau, h, params.epsilon, params.lam)

    end = mesh.n_steps
    while state.step_index < end:
        dues = [max(obs.due_after(state.step_index), state.step_index + 1) for obs in observers]
        target = min([end] + [d for d in dues if d < end])
        k = target - state.step_index
        done, amp = advance(state.u_prev, state.u_curr, k)
        if amp > state.amplitude_max:
            state.amplitude_max = amp
        if done < k:
            failed = state.step_index + done + 1
            state.step_index += done
            raise StepOverflowError(failed, failed * tau, state.amplitude_max)
        state.step_index = target
        for obs, due in zip(observers, dues):
            if due == target:
                obs(state)

    post_sigma = sigma_max(params.epsilon, state.amplitude_max)
    post = stability_limit(params, grid, post_sigma, tau)
    post_ok = post.satisfied is not False
    if not post_ok:
        warnings.warn(
            f"realized sigma_max {post_sigma:.4g} retroactively violates the "
            f"step-size bound (tau = {tau:.4g} > {post.tau_limit:.4g})",
            StabilityWarning,
            stacklevel=2,
        )
    return SimulationResult(state, pre, post, post_ok)
