"""Least-squares drift estimation for small-noise Levy-driven SDEs.

Simulate dX_t = b(X_t, theta) dt + eps dL_t on [0, 1], estimate theta from
the discrete sample by minimizing the least-squares contrast, and check the
small-noise asymptotics (consistency, and the rescaled error law
eps^{-1}(theta_hat - theta0) -> I(theta0)^{-1} S(theta0)) by Monte Carlo.
"""

from .estimate import (
    EstimationResult,
    SingularNormalEquationsError,
    contrast,
    contrast_difference,
    estimate,
    estimate_closed_form_affine,
    estimate_general,
    estimate_newton_scalar,
    score,
)
from .harness import (
    ExperimentPlan,
    ExperimentReport,
    KsSummary,
    LadderPointStats,
    RepRecord,
    ks_critical_value,
    ks_two_sample,
    replication_rows,
    report_to_dict,
    run_consistency,
    run_limit_law,
)
from .limitlaw import (
    InformationMatrix,
    LimitLawSample,
    NotPositiveDefiniteError,
    information_matrix,
    invert_information,
    sample_limit_closed_form_sqrt_shift,
    sample_limit_distribution,
    sample_limit_score,
    write_draws_csv,
)
from .models import (
    CATALOG,
    DriftModel,
    IdentifiabilityReport,
    ModelCatalogEntry,
    NonFiniteDriftError,
    OutOfBoxError,
    check_identifiability_grid,
    fd_grad_theta,
    get_entry,
    get_model,
    lipschitz_witness,
)
from .noise import (
    CompoundPoisson,
    LevySpec,
    NoisePath,
    NoiseSpecError,
    Stable,
    max_abs_on_path,
    sample_increments,
    sample_stable_standard,
    substream,
)
from .ode import BlowUpError, DeterministicPath, drift_residual, interp_x0, solve_x0
from .simulate import (
    GronwallReport,
    ObservationSet,
    PathExplodedError,
    SimConfig,
    gronwall_check,
    observations_from_values,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "CATALOG",
    "BlowUpError",
    "CompoundPoisson",
    "DeterministicPath",
    "DriftModel",
    "EstimationResult",
    "ExperimentPlan",
    "ExperimentReport",
    "GronwallReport",
    "IdentifiabilityReport",
    "InformationMatrix",
    "KsSummary",
    "LadderPointStats",
    "LevySpec",
    "LimitLawSample",
    "ModelCatalogEntry",
    "NoisePath",
    "NoiseSpecError",
    "NonFiniteDriftError",
    "NotPositiveDefiniteError",
    "ObservationSet",
    "OutOfBoxError",
    "PathExplodedError",
    "RepRecord",
    "SimConfig",
    "SingularNormalEquationsError",
    "check_identifiability_grid",
    "contrast",
    "contrast_difference",
    "drift_residual",
    "estimate",
    "estimate_closed_form_affine",
    "estimate_general",
    "estimate_newton_scalar",
    "fd_grad_theta",
    "get_entry",
    "get_model",
    "gronwall_check",
    "information_matrix",
    "interp_x0",
    "invert_information",
    "ks_critical_value",
    "ks_two_sample",
    "lipschitz_witness",
    "max_abs_on_path",
    "observations_from_values",
    "replication_rows",
    "report_to_dict",
    "run_consistency",
    "run_limit_law",
    "sample_increments",
    "sample_limit_closed_form_sqrt_shift",
    "sample_limit_distribution",
    "sample_limit_score",
    "sample_stable_standard",
    "score",
    "simulate",
    "solve_x0",
    "substream",
    "write_draws_csv",
    "__version__",
]
