"""Soft clustering of covariance operators under a transport-based
Procrustes distance, with entropy-constrained memberships, cluster-count
diagnostics, a permutation test, and file-based tooling."""

from .errors import (
    CovClustError,
    DegenerateDistances,
    DimMismatch,
    EmptySet,
    InputFormatError,
    InvalidDistance,
    InvalidMatrix,
    InvalidParam,
    NeedsTwoClusters,
    NotPSD,
    RequiresRawCurves,
    TooFewCurves,
    TooFewItems,
)
from .linalg import check_cov, inv_sqrt_psd, sqrt_psd, sym, trace_sqrt_product
from .wasserstein import (
    BarycenterResult,
    frechet_mean,
    pairwise_dist2,
    transport_map,
    wp_dist2,
)
from .softclust import (
    ClusterSolution,
    SampleCov,
    SoftClustConfig,
    fit,
    fit_reduced,
    init_medoids,
    partition_at,
    partition_stats,
    solve_partition,
    suggested_entropy,
)
from .dataio import (
    FunctionalSample,
    SyntheticSpec,
    fourier_basis,
    population_cov,
    read_cov_matrix,
    read_curves,
    read_labels,
    sample_cov,
    simulate,
    write_cov_matrix,
    write_curves,
    write_labels,
)
from .validation import (
    PermTestResult,
    TaswProfile,
    credibilities,
    mds_coords,
    permutation_test,
    silhouette_widths,
    tasw,
    tasw_scan,
)

__version__ = "0.1.0"

__all__ = [
    "BarycenterResult",
    "ClusterSolution",
    "CovClustError",
    "DegenerateDistances",
    "DimMismatch",
    "EmptySet",
    "FunctionalSample",
    "InputFormatError",
    "InvalidDistance",
    "InvalidMatrix",
    "InvalidParam",
    "NeedsTwoClusters",
    "NotPSD",
    "PermTestResult",
    "RequiresRawCurves",
    "SampleCov",
    "SoftClustConfig",
    "SyntheticSpec",
    "TaswProfile",
    "TooFewCurves",
    "TooFewItems",
    "check_cov",
    "credibilities",
    "fit",
    "fit_reduced",
    "fourier_basis",
    "frechet_mean",
    "init_medoids",
    "inv_sqrt_psd",
    "mds_coords",
    "pairwise_dist2",
    "partition_at",
    "partition_stats",
    "permutation_test",
    "population_cov",
    "read_cov_matrix",
    "read_curves",
    "read_labels",
    "sample_cov",
    "silhouette_widths",
    "simulate",
    "solve_partition",
    "sqrt_psd",
    "suggested_entropy",
    "sym",
    "tasw",
    "tasw_scan",
    "trace_sqrt_product",
    "transport_map",
    "wp_dist2",
    "write_cov_matrix",
    "write_curves",
    "write_labels",
]
