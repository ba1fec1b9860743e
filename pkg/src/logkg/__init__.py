"""Finite-difference solvers for the regularized logarithmic Klein-Gordon
equation on 1D periodic domains, with stability diagnostics and
convergence-study drivers."""

from .core import (
    ErrorReport,
    Grid1D,
    TimeMesh,
    error_report,
    forward_diff,
    inner,
    norm_l2,
    norm_linf,
    second_diff,
)
from .schemes import (
    AmplificationQuery,
    Scheme,
    SchemeParams,
    SimulationResult,
    SnapshotRecorder,
    SolverState,
    StabilityReport,
    StabilityViolation,
    StabilityWarning,
    StepOverflowError,
    F_eps,
    amplification_factor,
    f_eps,
    first_step,
    initial_state,
    run_simulation,
    sigma_max,
    stability_limit,
    step_efd,
    step_sifd,
)
from .problems import (
    ProblemSpec,
    even_bump,
    example1_exact,
    get_problem,
    pde_residual,
    sample_initial_data,
    traveling_gausson,
)
from .analysis import (
    ConvergenceTable,
    EnergySample,
    EnergySampler,
    ReferenceQuality,
    ReferenceResolution,
    StudyKind,
    discrete_energy,
    discretization_convergence_study,
    epsilon_convergence_study,
    make_reference,
    observed_rates,
    restrict,
    total_convergence_study,
)
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
