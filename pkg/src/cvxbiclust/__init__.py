"""Convex biclustering via fusion-penalized least squares.

The estimator minimizes

    0.5 * ||X - U||_F^2 + gamma * [ Omega_col(U) + Omega_row(U^T) ]

over centroid matrices U, where each Omega term is a weighted sum of
pairwise l2 differences across a sparse k-NN graph.  Rows and columns of U
coalesce as gamma grows, inducing a checkerboard biclustering; gamma is
picked by hold-out matrix completion.
"""

from .core import (
    IndexPairSet,
    Partition,
    center_grand_mean,
    frobenius_distance,
    grand_mean,
    load_matrix_csv,
    make_rng,
    write_matrix_csv,
)
from .metrics import (
    ContingencyTable,
    adjusted_rand_index,
    bicluster_flatten,
    rand_index,
    variation_of_information,
)
from .pipeline import PipelineParams, PipelineResult, build_graphs, select_and_fit
from .prox import FusionProxProblem, ProxSolution, extract_partition, prox_fusion
from .refine import RefinementParams, adaptive_cobra, thresholded_assign
from .selection import HoldoutSpec, ValidationCurve, cobra_missing, sample_holdout, select_gamma
from .simulate import CheckerboardSpec, generate_checkerboard, generate_nonckb, perturb
from .solver import (
    BiclustProblem,
    BiclusterFit,
    DykstraState,
    bicluster_means,
    cobra_fit,
    default_gamma_grid,
    gamma_max_certificate,
    gamma_max_search,
    penalty_value,
    solution_path,
)
from .weights import (
    ConnectivityError,
    WeightedGraph,
    WeightParams,
    bridge_components,
    default_target_sums,
    is_connected,
    knn_gaussian_weights,
)

__version__ = "0.1.0"

__all__ = [
    "BiclustProblem",
    "BiclusterFit",
    "CheckerboardSpec",
    "ConnectivityError",
    "ContingencyTable",
    "DykstraState",
    "FusionProxProblem",
    "HoldoutSpec",
    "IndexPairSet",
    "Partition",
    "PipelineParams",
    "PipelineResult",
    "ProxSolution",
    "RefinementParams",
    "ValidationCurve",
    "WeightParams",
    "WeightedGraph",
    "adaptive_cobra",
    "adjusted_rand_index",
    "bicluster_flatten",
    "bicluster_means",
    "bridge_components",
    "build_graphs",
    "center_grand_mean",
    "cobra_fit",
    "cobra_missing",
    "default_gamma_grid",
    "default_target_sums",
    "extract_partition",
    "frobenius_distance",
    "gamma_max_certificate",
    "gamma_max_search",
    "generate_checkerboard",
    "generate_nonckb",
    "grand_mean",
    "is_connected",
    "knn_gaussian_weights",
    "load_matrix_csv",
    "make_rng",
    "penalty_value",
    "perturb",
    "prox_fusion",
    "rand_index",
    "sample_holdout",
    "select_and_fit",
    "select_gamma",
    "solution_path",
    "thresholded_assign",
    "variation_of_information",
    "write_matrix_csv",
]
