"""Differentially private Bayesian posterior sampling via data contamination."""

__version__ = "0.1.0"

from .analysis import (
    DecayFit,
    decay_fit,
    fisher_information,
    hellinger,
    hellinger_between_parameters,
    mse_stats,
    prior_mass_bounds,
)
from .baselines import (
    MeanEstimatorResult,
    bayes_mean_draw,
    clipped_mean,
    coinpress_mean,
    gaussian_mechanism_mean,
)
from .errors import (
    BatchQualityError,
    ConfigurationError,
    ContamDPError,
    CurvatureError,
    DegeneracyError,
    DomainError,
    NonConvergenceError,
    NumericalError,
    SamplerError,
)
from .inference import (
    GaussianPrior,
    LaplaceApproximation,
    ParticleCloud,
    grad_log_posterior,
    importance_sample,
    laplace_approximation,
    log_posterior,
    log_posterior_many,
    map_estimate,
    reweight_drop_last,
    rwm_sample,
)
from .models import (
    BernoulliHalfContamination,
    CauchyRegressionModel,
    CauchyScaleContamination,
    ContaminatedModel,
    Dataset,
    GaussianLinearModel,
    LogisticModel,
    StudentTContamination,
    TruncatedNormalMeanModel,
    TruncatedStudentTContamination,
    contaminate,
    likelihood_ratio,
    log_density,
    make_covariates,
    sample_dataset,
)
from .harness import (
    resolve_config,
    run_fisher_check,
    run_mean_bench,
    run_regression_decay,
    run_table1,
    run_verify_prop1,
)
from .privacy import (
    EpsilonEstimate,
    EstimationSetup,
    NeighbourhoodBox,
    PrivacyBudget,
    ZcdpBudget,
    choose_phi,
    dp_from_zcdp,
    estimate_epsilon,
    estimate_epsilon_once,
    eta_bound,
    expectation_ratio,
    nearest_rank_percentile,
    verify_decomposition,
    zcdp_from_dp,
)
