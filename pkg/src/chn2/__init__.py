"""Clustroid hierarchical nearest-neighbor clustering on spatial point
patterns, with descending-chain statistics and aggregation detection."""

from .geometry import Metric, Point, Window, distance, scale_sample, single_linkage
from .hierarchy import (
    Hierarchy,
    LevelGraph,
    Pair,
    build_hierarchy,
    cluster_subtrees,
    descendant_counts,
    extract_pairs,
    level0,
    nn_k_step,
)
from .pointprocess import CoxBallSpec, Sample, gen_binomial, gen_cox_balls, gen_poisson
from .spatial_index import NnIndex
from .stats import (
    DetectorConfig,
    detect_aggregation,
    decay_ratios,
    level_stats,
    mean_distance_series,
    poisson_baseline,
)

__version__ = "0.1.0"

__all__ = [
    "Metric",
    "Point",
    "Window",
    "distance",
    "scale_sample",
    "single_linkage",
    "Hierarchy",
    "LevelGraph",
    "Pair",
    "build_hierarchy",
    "cluster_subtrees",
    "descendant_counts",
    "extract_pairs",
    "level0",
    "nn_k_step",
    "CoxBallSpec",
    "Sample",
    "gen_binomial",
    "gen_cox_balls",
    "gen_poisson",
    "NnIndex",
    "DetectorConfig",
    "detect_aggregation",
    "decay_ratios",
    "level_stats",
    "mean_distance_series",
    "poisson_baseline",
    "__version__",
]
