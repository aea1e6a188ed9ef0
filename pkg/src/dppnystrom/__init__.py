"""Diverse landmark selection for Nystrom kernel approximation.

Samples landmark columns from a cardinality-constrained determinantal
point process via a fast-mixing Gibbs chain, alongside classical
selection baselines, Nystrom error and bound calculators, kernel ridge
regression risk analysis, and chain mixing diagnostics. The top-level
estimators compose with scikit-learn pipelines; the ``dppnystrom-bench``
command drives reproducible CSV benchmarks.
"""

from .baselines import (
    CentroidLandmarks,
    RankExhaustedWarning,
    ScoreVector,
    adaptive_full,
    adaptive_partial,
    approx_leverage_scores,
    kmeans_landmarks,
    leverage_scores,
    regularized_leverage_scores,
    sample_by_scores,
    select_landmarks,
    uniform_landmarks,
)
from .data import Dataset, load_dataset, rbf_kernel, split, standardize, synthetic_regression
from .estimators import DppNystroem, NystromKernelRidge
from .krr import (
    KrrModel,
    RiskReport,
    fit_exact,
    fit_nystrom,
    grid_search_parameters,
    krr_bias_hp_bound,
    krr_risk_ratio_bound,
    nystrom_residual_trace,
    predict,
    risk_decomposition,
)
from .linalg import (
    CholFactor,
    ESPTable,
    PsdMatrix,
    SingularMatrixError,
    chol_swap_update,
    cholesky_psd,
    eigh,
    elementary_symmetric,
    logdet_submatrix,
    pinv_psd,
    rank_k_truncation_error,
)
from .mixing import (
    ContractionEstimate,
    CouplingTerms,
    MixingBound,
    coupling_terms,
    error_trace,
    estimate_alpha,
    mixing_time_bound,
    tv_curve,
    tv_to_stationary,
)
from .nystrom import (
    ErrorReport,
    FunctionKernelBackend,
    MatrixKernelBackend,
    NystromApproximation,
    build_nystrom,
    esp_ratio_bound_check,
    expected_error_bound,
    hp_error_bound,
    rbf_backend,
    relative_error,
)
from .sampling import (
    GibbsState,
    LandmarkSet,
    SubsetDistribution,
    enumerate_cdpp,
    gibbs_sample,
    gibbs_step,
    gibbs_swap_prob,
    kmeanspp_init,
    lazy_transition_matrix,
    sample_cdpp_exact,
    swap_probability,
)
from .streams import as_generator, philox_stream, replica_streams

__version__ = "0.1.0"
