from .baselines import rand_observe, reservoir_observe
from .buffer import (
    Mutation,
    MutationReport,
    RecentBuffer,
    ScoredBuffer,
    Slot,
    rehearsal_sample,
)
from .clustering import ClusterMetric, ClusterState, clust_observe
from .greedy import DEFAULT_COMPARISONS, greedy_score, gss_greedy_observe
from .iqp import (
    IqpSolution,
    exhaustive_select,
    gss_iqp_observe,
    iqp_select,
    local_search_select,
    merge_recent,
    selection_objective,
)
from .strategy import (
    STRATEGIES,
    ObserveContext,
    SelectionStrategy,
    StrategyOptions,
    build_strategy,
)

__all__ = [
    "DEFAULT_COMPARISONS",
    "STRATEGIES",
    "ClusterMetric",
    "ClusterState",
    "IqpSolution",
    "Mutation",
    "MutationReport",
    "ObserveContext",
    "RecentBuffer",
    "ScoredBuffer",
    "SelectionStrategy",
    "Slot",
    "StrategyOptions",
    "build_strategy",
    "clust_observe",
    "exhaustive_select",
    "greedy_score",
    "gss_greedy_observe",
    "gss_iqp_observe",
    "iqp_select",
    "local_search_select",
    "merge_recent",
    "rand_observe",
    "rehearsal_sample",
    "reservoir_observe",
    "selection_objective",
]
