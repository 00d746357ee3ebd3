"""Nonlinear Kalman smoothing as damped Gauss-Newton optimization.

The package provides three trajectory smoothers over a shared problem
definition:

- ``oks_smooth``: Gauss-Newton with Armijo backtracking on the full
  maximum-a-posteriori least-squares objective, each iteration solved
  through a block-tridiagonal Cholesky factorization;
- ``eks_smooth``: the extended smoother, recovered as exactly one such
  iteration with a unit step;
- ``ukf_forward`` / ``urts_backward``: the unscented filter and smoother.

``benchmarks`` generates the two study systems (linear sine tracker,
non-harmonic oscillator) and ``harness`` scores smoothers over an oracle
parameter grid against ground truth.
"""

__version__ = "0.1.0"

from .blocktridiag import (
    BlockCholeskyFactor,
    BlockTridiagonalMatrix,
    count_operations,
    factor,
    reconstruct,
    solve,
)
from .benchmarks import (
    NHOParams,
    ObservationSet,
    Trajectory,
    build_linear_problem,
    build_nho_problem,
    generate_nho_truth,
    generate_sine_truth,
    integrated_bm_cov,
    observe,
    read_observations_csv,
    read_trajectory_csv,
    write_observations_csv,
    write_trajectory_csv,
)
from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    DegenerateTruth,
    DimensionMismatch,
    GNSmoothError,
    LineSearchFailed,
    NotPositiveDefinite,
)
from .gn import GNOptions, SmootherResult, eks_smooth, gradient, oks_smooth
from .harness import (
    ArgminCell,
    GridSearchResult,
    ParameterGrid,
    emit_results,
    observation_init,
    oracle_grid_search,
    relative_l2,
    run_smoother,
    truth_at_observation_times,
)
from .statespace import (
    MeasurementModel,
    ProcessModel,
    SmoothingProblem,
    StateSequence,
    assemble_normal_system,
    evaluate_objective,
    finite_difference_jacobian,
)
from .unscented import (
    FilteredTrajectory,
    GaussianBelief,
    SigmaPoints,
    UTParams,
    sigma_points,
    smoothed_moments,
    ukf_forward,
    urts_backward,
)

__all__ = [
    "__version__",
    "ArgminCell",
    "BlockCholeskyFactor",
    "BlockTridiagonalMatrix",
    "ConfigError",
    "DegenerateTruth",
    "DimensionMismatch",
    "FilteredTrajectory",
    "GNOptions",
    "GNSmoothError",
    "GaussianBelief",
    "GridSearchResult",
    "LineSearchFailed",
    "MeasurementModel",
    "NHOParams",
    "NotPositiveDefinite",
    "ObservationSet",
    "ParameterGrid",
    "ProcessModel",
    "RunConfig",
    "SigmaPoints",
    "SmootherResult",
    "SmoothingProblem",
    "StateSequence",
    "Trajectory",
    "UTParams",
    "assemble_normal_system",
    "build_linear_problem",
    "build_nho_problem",
    "count_operations",
    "eks_smooth",
    "emit_results",
    "evaluate_objective",
    "factor",
    "finite_difference_jacobian",
    "generate_nho_truth",
    "generate_sine_truth",
    "gradient",
    "integrated_bm_cov",
    "load_config",
    "observation_init",
    "observe",
    "oks_smooth",
    "oracle_grid_search",
    "read_observations_csv",
    "read_trajectory_csv",
    "reconstruct",
    "relative_l2",
    "run_smoother",
    "sigma_points",
    "smoothed_moments",
    "solve",
    "truth_at_observation_times",
    "ukf_forward",
    "urts_backward",
    "write_observations_csv",
    "write_trajectory_csv",
]
