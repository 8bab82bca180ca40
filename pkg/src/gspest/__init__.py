"""Graph spectral estimation of network states from power measurements.

Weighted graphs with deterministic spectral decompositions, graph filters
(polynomial, low-pass inverse, rational, low-rank rational), sample moment
pipelines, linear and spectral MMSE estimators with parametric filter fits,
topology-change updates, and Monte Carlo experiment protocols.
"""

from .errors import (
    ConfigError,
    DisconnectedGraphError,
    GspestError,
    InvalidGraphError,
    PerturbationInfeasibleError,
    SingularMomentsError,
    UnstableFilterError,
)
from .estimators import (
    FittedGspEstimator,
    LinearEstimator,
    almmse,
    arma_coefficients,
    estimate,
    estimator_from_json,
    estimator_to_json,
    fit_arma,
    fit_lpi,
    fit_lr_arma,
    gsp_lmmse,
    gsp_response,
    lpi_coefficients,
    lr_arma_coefficients,
    remap_estimator,
    sample_diag_lmmse,
    sample_lmmse,
    update_for_topology,
)
from .filters import (
    FilterSpec,
    apply_filter,
    denominator_tolerance,
    filter_matrix,
    lpi_basis,
    lpi_basis_from_eigenvalues,
    numerical_rank,
    response,
    response_at,
    spec_from_json,
    spec_to_json,
    vandermonde,
)
from .graphs import (
    ReducedSpectrum,
    SpectralGraph,
    WeightedGraph,
    build_laplacian,
    gft,
    igft,
    perturb_edges,
    perturb_vertices,
    read_edge_list,
    reduce_spectrum,
    write_edge_list,
)
from .harness import (
    ExperimentConfig,
    MseReport,
    MseRow,
    build_model,
    draw_test_set,
    evaluate_mse,
    experiment_a,
    experiment_b,
    fit_by_label,
    measure_runtime,
    squared_errors,
)
from .models import (
    AcGridModel,
    MeasurementModel,
    NoiseModel,
    SmoothPrior,
    ac_measurement_model,
    ac_power,
    audit_model_structure,
    bundled_ieee118,
    linear_filter_model,
    load_grid,
    perturb_grid,
    sample_prior,
)
from .moments import (
    SampleMoments,
    TrainingSet,
    compute_moments,
    generate,
    read_training_csv,
    require_positive_freq_var,
)
from .rng import derive, generator

__version__ = "0.1.0"

__all__ = [
    "AcGridModel",
    "ConfigError",
    "DisconnectedGraphError",
    "ExperimentConfig",
    "FilterSpec",
    "FittedGspEstimator",
    "GspestError",
    "InvalidGraphError",
    "LinearEstimator",
    "MeasurementModel",
    "MseReport",
    "MseRow",
    "NoiseModel",
    "PerturbationInfeasibleError",
    "ReducedSpectrum",
    "SampleMoments",
    "SingularMomentsError",
    "SmoothPrior",
    "SpectralGraph",
    "TrainingSet",
    "UnstableFilterError",
    "WeightedGraph",
    "ac_measurement_model",
    "ac_power",
    "almmse",
    "apply_filter",
    "arma_coefficients",
    "audit_model_structure",
    "build_laplacian",
    "build_model",
    "bundled_ieee118",
    "compute_moments",
    "denominator_tolerance",
    "derive",
    "draw_test_set",
    "estimate",
    "estimator_from_json",
    "estimator_to_json",
    "evaluate_mse",
    "experiment_a",
    "experiment_b",
    "filter_matrix",
    "fit_arma",
    "fit_by_label",
    "fit_lpi",
    "fit_lr_arma",
    "generate",
    "generator",
    "gft",
    "gsp_lmmse",
    "gsp_response",
    "igft",
    "linear_filter_model",
    "load_grid",
    "lpi_basis",
    "lpi_basis_from_eigenvalues",
    "lpi_coefficients",
    "lr_arma_coefficients",
    "measure_runtime",
    "numerical_rank",
    "perturb_edges",
    "perturb_grid",
    "perturb_vertices",
    "read_edge_list",
    "read_training_csv",
    "reduce_spectrum",
    "remap_estimator",
    "require_positive_freq_var",
    "response",
    "response_at",
    "sample_diag_lmmse",
    "sample_lmmse",
    "sample_prior",
    "spec_from_json",
    "spec_to_json",
    "squared_errors",
    "update_for_topology",
    "vandermonde",
    "write_edge_list",
]
