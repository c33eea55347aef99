"""Globally optimal K-means clustering via an LP relaxation: cutting planes
over facet inequalities, a restarted primal-dual LP solver with safe lower
bounds, spectral rounding, and a two-cluster dual-certificate check."""

from lpkmeans.core import (
    Partition,
    PointSet,
    is_partition_matrix,
    kmeans_bruteforce,
    kmeans_cost,
    lp_objective,
    partition_matrix,
    same_partition,
    squared_distances,
)
from lpkmeans.cutplane import SolveConfig, SolveTrace, solve_kmeans_lp
from lpkmeans.generators import GenSpec, generate, recovery_threshold

__version__ = "0.1.0"

__all__ = [
    "PointSet",
    "Partition",
    "squared_distances",
    "partition_matrix",
    "lp_objective",
    "kmeans_cost",
    "is_partition_matrix",
    "kmeans_bruteforce",
    "same_partition",
    "SolveConfig",
    "SolveTrace",
    "solve_kmeans_lp",
    "GenSpec",
    "generate",
    "recovery_threshold",
    "__version__",
]
