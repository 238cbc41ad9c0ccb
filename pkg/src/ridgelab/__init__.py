"""ridgelab: exact and Monte-Carlo expected-test-risk calculations for
optimally regularized ridge regression, with tooling to check sample-wise
and model-wise monotonicity, the two-point non-monotonicity construction,
and the PSD difference conditions for general quadratic penalties."""

from .problems import (
    GaussianProblem,
    ProjectionProblem,
    SampleBatch,
    sample_batch,
    sample_design,
    sample_orthonormal,
    sample_responses,
)
from .spectrum import (
    RiskEstimate,
    SpectrumSample,
    coupled_spectrum_pair,
    expected_risk_iso,
    iso_risk_curve,
    iso_risk_sweep,
    optimal_lambda_iso,
    optimal_risk_iso,
    singular_spectrum,
)
from .projection import (
    brute_force_risk_proj,
    expected_risk_proj,
    optimal_lambda_proj,
    optimal_risk_proj,
    proj_risk_curve,
    proj_risk_sweep,
    sigma_tilde_sq,
)
from .general import (
    GHEstimate,
    RegularizerSpec,
    adaptive_regularizer,
    adaptive_risk,
    estimate_GH,
    estimate_GH_pair,
    mc_risk_general,
    mc_risk_sweep,
    reduce_to_isotropic,
    risk_from_GH,
)
from .tuning import LambdaSearchResult, minimize_over_lambda, sweep_lambda
from .counterexample import (
    TwoPointDistribution,
    exact_expected_risk,
    optimal_counterexample,
    verify_nonmonotonicity,
)
from .conjecture import (
    PSDReport,
    condition_one,
    condition_two,
    implication_check,
)
from .features import (
    Dataset,
    FeatureModel,
    eval_classifier,
    fit_ridge_multi,
    load_idx_dataset,
    relu_embed,
    sample_feature_matrix,
    synthetic_dataset,
)

__version__ = "0.1.0"
