"""Regression with probability-distribution responses.

Covariates are ordinary vectors; each response is a whole distribution
(sampled, quantile-tabulated, or Gaussian).  The model is a random
coefficient matrix whose law is fit by minimizing the mean squared
Wasserstein distance between predicted and observed response laws,
either with a particle cloud (scalar responses) or in closed Gaussian
form (vector responses).
"""

from .conditional import (
    BandResult,
    CoeffSummary,
    ConditionSpec,
    Constraint,
    coeff_summary,
    conditional_band,
    conditional_variance_schur,
    exceedance_prob,
    select,
)
from .data import (
    Dataset,
    IngestReport,
    load_dataset_csv,
    load_dataset_json,
    load_model_json,
    save_dataset_csv,
    save_dataset_json,
    save_model_json,
)
from .errors import (
    ConvergenceError,
    DegenerateValueError,
    DivergenceError,
    EnumerationLimitError,
    InputError,
    WassregError,
)
from .frechet import (
    FrechetModel1D,
    FrechetModelGauss,
    frechet_coeff_law,
    frechet_fit_1d,
    frechet_fit_gauss,
    frechet_predict_1d,
    frechet_predict_gauss,
    pava,
)
from .gaussian import (
    BwStep,
    CoeffGaussian,
    GaussianConfig,
    bw_gradient_step,
    fit_gaussian,
    gaussian_foc_residual,
    gaussian_objective,
    gradient_norm,
    smoothness_constant,
)
from .metrics import (
    EvalReport,
    LooResult,
    RateStudyResult,
    evaluate,
    in_sample_error,
    incoherence,
    loo_cv,
    pairwise_w2,
    predict_marginal,
    rate_study,
    wasserstein_r2,
)
from .oracle import DiscreteProblem, OracleResult, inner_ols_cost, solve_multimarginal, solve_multimarginal_lp
from .particle import (
    ParticleCloud,
    ParticleConfig,
    fit,
    gradient_step,
    normal_equation_residual,
    objective,
)
from .reports import FitReport
from .rng import stream, subseed
from .simulate import (
    FAMILIES_2D,
    SWEEP_FAMILIES_1D,
    DeformSpec,
    RealizedMap,
    TemplateSpec,
    bivariate_template,
    check_c2_montecarlo,
    check_c3,
    custom_template,
    deform_spec,
    exact_responses,
    figure_only_specs,
    generate_dataset,
    sample_deformation,
    sample_design,
    univariate_template,
)
from .transport import (
    Empirical,
    GaussianMeasure,
    QuantileGrid,
    barycenter_1d,
    brenier_1d,
    gaussian_barycenter_fixedpoint,
    gaussian_transport_coeff,
    gaussian_w2_squared,
    quantile_grid_of,
    quantiles_of,
    w2_squared,
    w2_squared_1d,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
