"""Computable s-convergence: grid measures, shapes, k-shapes and Hausdorff distances."""

from sgraphon.errors import (
    DimensionMismatch,
    EmptyCloud,
    EmptyEdgeSet,
    HardModeInfeasible,
    InfeasibleSpec,
    InvalidInput,
    MismatchedSequences,
    NonConvergence,
    ResolutionGuard,
    ResolutionMismatch,
    SGraphonError,
)
from sgraphon.grid import (
    Graph,
    GridMeasure,
    RhoMetric,
    coarsen,
    embed_graph,
    integrate_test_function,
    refine,
    rho_distance,
)
from sgraphon.kernels import (
    FDKernel,
    FractionalPartition,
    kernel_to_partition,
    pushforward,
    quotient,
    sample_doubly_stochastic,
    sample_fractional_partition,
)
from sgraphon.shapes import (
    KShapeCloud,
    ShapeCloud,
    build_kshape,
    build_shape,
    hausdorff_matrix,
    hausdorff_rho,
    regularity_gap,
)

__version__ = "0.1.0"

__all__ = [
    "DimensionMismatch",
    "EmptyCloud",
    "EmptyEdgeSet",
    "FDKernel",
    "FractionalPartition",
    "Graph",
    "GridMeasure",
    "HardModeInfeasible",
    "InfeasibleSpec",
    "InvalidInput",
    "KShapeCloud",
    "MismatchedSequences",
    "NonConvergence",
    "ResolutionGuard",
    "ResolutionMismatch",
    "RhoMetric",
    "SGraphonError",
    "ShapeCloud",
    "build_kshape",
    "build_shape",
    "coarsen",
    "embed_graph",
    "hausdorff_matrix",
    "hausdorff_rho",
    "integrate_test_function",
    "kernel_to_partition",
    "pushforward",
    "quotient",
    "refine",
    "regularity_gap",
    "rho_distance",
    "sample_doubly_stochastic",
    "sample_fractional_partition",
]
