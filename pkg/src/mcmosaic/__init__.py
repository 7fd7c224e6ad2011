"""Simulation toolkit for coalescing block masses driven by one walk.

A single set of exponential clocks encodes, for every inhomogeneity level q
at once: the component partition, spanning forests (per-level and monotone),
surplus-edge constructions (static, dynamic, multigraph), the ornamented
excursion mosaic with its slice geometry, and diffusion-limit comparisons.
"""
from .core import (
    ClockAssignment,
    RngStream,
    WeightedConfig,
    load_config,
    sample_clocks,
    sigma,
)
from .dynamics import (
    ComponentBlock,
    MergerEvent,
    MonotoneForest,
    Trajectory,
    build_monotone_forest,
    merger_time,
    run_trajectory,
    sample_merge_edge,
)
from .limit import (
    ExcursionMarks,
    GridPath,
    LimitParams,
    VPath,
    excursions_and_marks,
    hypothesis_report,
    sample_limit_path,
    sample_limit_reference,
    sample_Vc,
    scaling_experiment,
)
from .mosaic import (
    Baseline,
    HasseOrders,
    OrnamentedExcursion,
    Parallelogram,
    Slice,
    build_mosaic,
    orders,
    replay,
    same_shape,
    slice_decomposition,
    validate,
)
from .oracle import (
    PAIR_ORACLE_MAX_N,
    OracleTrajectory,
    exact_partition_law,
    gillespie_graph,
    gillespie_trajectory,
)
from .stats import (
    ALPHA,
    ChiSquareResult,
    KsResult,
    PoissonMomentResult,
    chi_square,
    chi_square_homogeneity,
    ks_distance,
    ks_test,
    poisson_mean_test,
)
from .surplus import (
    GraphEdge,
    InfluenceRegion,
    LabeledGraph,
    SurplusCountSampler,
    ZetaProcess,
    activated_processes,
    dynamic_surplus,
    influence_region,
    static_surplus,
    total_intensity,
)
from .walk import (
    Excursion,
    ExcursionDecomposition,
    Forest,
    WalkPath,
    area_under_reflection,
    breadth_first_forest,
    bulk_component_stats,
    decompose,
)

__version__ = "0.1.0"

__all__ = [
    "ALPHA",
    "Baseline",
    "ChiSquareResult",
    "ClockAssignment",
    "ComponentBlock",
    "Excursion",
    "ExcursionDecomposition",
    "ExcursionMarks",
    "Forest",
    "GraphEdge",
    "GridPath",
    "HasseOrders",
    "InfluenceRegion",
    "KsResult",
    "LabeledGraph",
    "LimitParams",
    "MergerEvent",
    "MonotoneForest",
    "OracleTrajectory",
    "OrnamentedExcursion",
    "PAIR_ORACLE_MAX_N",
    "Parallelogram",
    "PoissonMomentResult",
    "RngStream",
    "Slice",
    "SurplusCountSampler",
    "Trajectory",
    "VPath",
    "WalkPath",
    "WeightedConfig",
    "ZetaProcess",
    "activated_processes",
    "area_under_reflection",
    "breadth_first_forest",
    "build_monotone_forest",
    "build_mosaic",
    "bulk_component_stats",
    "chi_square",
    "chi_square_homogeneity",
    "decompose",
    "dynamic_surplus",
    "exact_partition_law",
    "excursions_and_marks",
    "gillespie_graph",
    "gillespie_trajectory",
    "hypothesis_report",
    "influence_region",
    "ks_distance",
    "ks_test",
    "load_config",
    "merger_time",
    "orders",
    "poisson_mean_test",
    "replay",
    "run_trajectory",
    "same_shape",
    "sample_clocks",
    "sample_limit_path",
    "sample_limit_reference",
    "sample_merge_edge",
    "sample_Vc",
    "scaling_experiment",
    "sigma",
    "slice_decomposition",
    "static_surplus",
    "total_intensity",
    "validate",
    "__version__",
]
