"""Learning positive one-hidden-layer networks under Gaussian inputs, and a
laboratory for the matching statistical-query hard instances."""

__version__ = "0.1.0"

from .chow import ChowMatrix, MeanEstimate, analytic_chow2, chow_spectral_error, estimate_chow2, estimate_mean
from .core import (
    ActivationSpec,
    ExampleOracle,
    NetworkParams,
    NoiseKind,
    NoiseModel,
    SampleSet,
    activation_moments,
    draw_samples,
    eval_network,
    get_activation,
    make_oracle,
    random_network,
)
from .estimators import ChowSubspace, PositiveNetworkRegressor
from .hermite import HermiteExpansion, cross_plane_correlation, degree_part_norm, expand_2d, hermite_1d
from .learner import (
    BudgetError,
    Cover,
    LearnConfig,
    LearnResult,
    Subspace,
    build_cover,
    cover_radius,
    empirical_sq_error,
    enumerate_candidates,
    learn,
    nn_learner,
    subspace_residual,
    top_k_subspace,
)
from .quadrature import PolarGrid, QuadratureGrid
from .rng import RngStream
from .sqhard import (
    HardInstance,
    PackingError,
    PlaneQuery,
    PlaneSet,
    PrecisionError,
    SqOracle,
    hard2d_eval,
    make_instance,
    moment_check,
    nonvanishing_check,
    pairwise_correlation_report,
    plane_packing,
    random_plane,
    sq_query,
)

__all__ = [
    "__version__",
    "activation_moments",
    "ActivationSpec",
    "analytic_chow2",
    "BudgetError",
    "build_cover",
    "chow_spectral_error",
    "ChowMatrix",
    "ChowSubspace",
    "Cover",
    "cover_radius",
    "cross_plane_correlation",
    "degree_part_norm",
    "draw_samples",
    "empirical_sq_error",
    "enumerate_candidates",
    "estimate_chow2",
    "estimate_mean",
    "eval_network",
    "ExampleOracle",
    "expand_2d",
    "get_activation",
    "hard2d_eval",
    "HardInstance",
    "hermite_1d",
    "HermiteExpansion",
    "learn",
    "LearnConfig",
    "LearnResult",
    "make_instance",
    "make_oracle",
    "MeanEstimate",
    "moment_check",
    "NetworkParams",
    "nn_learner",
    "NoiseKind",
    "NoiseModel",
    "nonvanishing_check",
    "PackingError",
    "pairwise_correlation_report",
    "plane_packing",
    "PlaneQuery",
    "PlaneSet",
    "PolarGrid",
    "PositiveNetworkRegressor",
    "PrecisionError",
    "QuadratureGrid",
    "random_network",
    "random_plane",
    "RngStream",
    "SampleSet",
    "sq_query",
    "SqOracle",
    "Subspace",
    "subspace_residual",
    "top_k_subspace",
]
