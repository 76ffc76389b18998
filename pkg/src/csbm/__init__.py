"""Correlated stochastic block models: generation, matching, recovery.

The package samples families of correlated graphs from a common block-model
parent, aligns them with k-core matchings, recovers the hidden communities
from the aligned union, and maps the parameter regions where each step is
information-theoretically possible.
"""

from .generate import (
    BalanceReport,
    CorrelatedInstance,
    Params,
    balance_diagnostic,
    sample_instance,
    sample_instance_partition,
    sample_parent,
    split_union_graph,
    union_split_weights,
)
from .graphs import (
    Graph,
    PartialMatching,
    difference_graph,
    induced_subgraph,
    intersection_graph,
    k_core,
    read_edge_list,
    union_graph,
    write_edge_list,
)
from .harness import (
    ScalingResult,
    SweepConfig,
    SweepResult,
    TrialResult,
    region_grid_export,
    run_trial,
    scaling_experiment,
    sweep,
)
from .impossibility import SingletonReport, map_failure_witness, singleton_sets
from .matching import (
    MatchingEstimate,
    MatchingFamily,
    Metagraph,
    VertexClass,
    all_pairwise_matchings,
    build_metagraph,
    classify_good_bad,
    compose_matching_along_path,
    exact_matching_estimator,
    kcore_matching_bruteforce,
    kcore_matching_seeded,
)
from .recovery import (
    LabelEstimate,
    almost_exact_label,
    full_recovery,
    label_bad_vertices,
    label_good_vertices,
    overlap,
)
from .thresholds import (
    Condition,
    ConditionSet,
    RegionLabel,
    ThresholdPoint,
    chernoff_hellinger,
    classify_region,
    condition_set,
    connectivity_param,
)

__version__ = "0.1.0"

__all__ = [
    "BalanceReport",
    "Condition",
    "ConditionSet",
    "CorrelatedInstance",
    "Graph",
    "LabelEstimate",
    "MatchingEstimate",
    "MatchingFamily",
    "Metagraph",
    "Params",
    "PartialMatching",
    "RegionLabel",
    "ScalingResult",
    "SingletonReport",
    "SweepConfig",
    "SweepResult",
    "ThresholdPoint",
    "TrialResult",
    "VertexClass",
    "all_pairwise_matchings",
    "almost_exact_label",
    "balance_diagnostic",
    "build_metagraph",
    "chernoff_hellinger",
    "classify_good_bad",
    "classify_region",
    "compose_matching_along_path",
    "condition_set",
    "connectivity_param",
    "difference_graph",
    "exact_matching_estimator",
    "full_recovery",
    "induced_subgraph",
    "intersection_graph",
    "k_core",
    "kcore_matching_bruteforce",
    "kcore_matching_seeded",
    "label_bad_vertices",
    "label_good_vertices",
    "map_failure_witness",
    "overlap",
    "read_edge_list",
    "region_grid_export",
    "run_trial",
    "sample_instance",
    "sample_instance_partition",
    "sample_parent",
    "scaling_experiment",
    "singleton_sets",
    "split_union_graph",
    "sweep",
    "union_graph",
    "union_split_weights",
    "write_edge_list",
]
