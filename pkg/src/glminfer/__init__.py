"""L1-penalized GLMs with de-biased inference and a replication-study engine."""

from .families import (
    CoefficientVector,
    Dataset,
    GlmFamily,
    empirical_loss,
    hessian_matrix,
    score_vector,
)
from .lasso import (
    CvResult,
    LassoFit,
    MleFit,
    cross_validate,
    fit_lasso,
    fit_mle,
    fit_path,
    kkt_residual,
    lambda_grid,
    penalized_objective,
)
from .theta import ThetaMatrix, hessian_inverse_theta, nodewise_theta
from .debias import (
    BiasAudit,
    ConfidenceInterval,
    DebiasedEstimate,
    coefficient_ci,
    contrast_ci,
    debias,
    decomposition_audit,
    normal_quantile,
)
from .simulate import (
    CovarianceSpec,
    RepRecord,
    SimSummary,
    SimulationCell,
    build_xi_true,
    default_extra_signals,
    gen_covariates,
    gen_response,
    poisson_closed_form,
    run_cell,
    summarize,
)
from .errors import (
    ConfigError,
    ContrastError,
    DegenerateColumnError,
    GlmOverflowError,
    SingularHessianError,
)

__all__ = [
    "BiasAudit", "CoefficientVector", "ConfidenceInterval", "ConfigError",
    "ContrastError", "CovarianceSpec", "CvResult", "Dataset", "DebiasedEstimate",
    "DegenerateColumnError", "GlmFamily", "GlmOverflowError", "LassoFit", "MleFit",
    "RepRecord", "SimSummary", "SimulationCell", "SingularHessianError", "ThetaMatrix",
    "build_xi_true", "coefficient_ci", "contrast_ci", "cross_validate", "debias",
    "decomposition_audit", "default_extra_signals", "empirical_loss", "fit_lasso",
    "fit_mle", "fit_path", "gen_covariates", "gen_response", "hessian_inverse_theta",
    "hessian_matrix", "kkt_residual", "lambda_grid", "nodewise_theta",
    "normal_quantile", "penalized_objective", "poisson_closed_form", "run_cell",
    "score_vector", "summarize",
]

__version__ = "0.1.0"
