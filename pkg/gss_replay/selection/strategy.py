"""
SelectionStrategy implementations and their registry.

A strategy only ever sees examples (features, label, stream_index). The
ObserveContext hands out gradients and hidden features at the current
parameters on demand, so strategies that do not need them pay nothing.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, ClassVar, Optional, Sequence

import numpy as np

from ..errors import ConfigError, DegenerateVectorError
from ..geometry import EPSILON_NORM
from ..log import get_logger
from ..model import Example, MlpModel, hidden_features, per_example_gradients, stack_examples
from .baselines import rand_observe, reservoir_observe
from .buffer import Mutation, MutationReport, RecentBuffer, ScoredBuffer
from .clustering import ClusterMetric, ClusterState, clust_observe
from .greedy import DEFAULT_COMPARISONS, gss_greedy_observe
from .iqp import DEFAULT_RECENT_CAPACITY, ENUMERATION_LIMIT, RESTARTS, gss_iqp_observe, merge_recent

logger = get_logger(__name__)


@dataclass
class ObserveContext:
    """Current model and selection randomness for one observe call."""

    model: MlpModel
    rng: np.random.Generator

    def gradients(self, examples: Sequence[Example]) -> np.ndarray:
        if len(examples) == 0:
            return np.empty((0, self.model.parameter_count))
        return per_example_gradients(self.model, examples)

    def features(self, examples: Sequence[Example]) -> np.ndarray:
        return hidden_features(self.model, stack_examples(examples)[0])


class SelectionStrategy(ABC):
    """Behavioral contract: observe batches in stream order, expose the memory."""

    name: ClassVar[str]

    def __init__(self, capacity: int):
        self.buffer = ScoredBuffer(capacity)

    @abstractmethod
    def observe(self, batch: Sequence[Example], context: ObserveContext) -> list[MutationReport]:
        ...

    def memory(self) -> list[Example]:
        """Examples available for rehearsal or constraints."""
        return self.buffer.examples

    def flush(self, context: ObserveContext) -> None:
        """Settle any staged examples (end of stream)."""


class NoMemory(SelectionStrategy):
    """Single baseline: plain online SGD, nothing stored."""

    name = "none"

    def __init__(self, capacity: int = 0):
        super().__init__(0)

    def observe(self, batch, context):
        self.buffer.observed(len(batch))
        return [MutationReport(Mutation.DISCARDED, evicted=(x.stream_index,)) for x in batch]


class ReservoirStrategy(SelectionStrategy):
    name = "reservoir"

    def observe(self, batch, context):
        return [reservoir_observe(self.buffer, x, context.rng) for x in batch]


class RandomStrategy(SelectionStrategy):
    name = "rand"

    def observe(self, batch, context):
        return [rand_observe(self.buffer, batch, context.rng)]


class GreedyStrategy(SelectionStrategy):
    name = "gss-greedy"

    def __init__(self, capacity: int, n: int = DEFAULT_COMPARISONS, gate: bool = True):
        super().__init__(capacity)
        self.n = n
        self.gate = gate

    def observe(self, batch, context):
        gradients = context.gradients(batch)
        reports = []
        for x, g in zip(batch, gradients):
            try:
                reports.append(gss_greedy_observe(
                    self.buffer, x, g, self.n, context.rng, context.gradients, gate=self.gate,
                ))
            except DegenerateVectorError:
                logger.debug("Discarding example with zero gradient", stream_index=x.stream_index)
                reports.append(MutationReport(Mutation.DISCARDED, evicted=(x.stream_index,)))
        return reports


class IqpStrategy(SelectionStrategy):
    name = "gss-iqp"

    def __init__(
        self,
        capacity: int,
        recent_capacity: int = DEFAULT_RECENT_CAPACITY,
        enumeration_limit: int = ENUMERATION_LIMIT,
        restarts: int = RESTARTS,
    ):
        super().__init__(capacity)
        self.recent = RecentBuffer(recent_capacity)
        self.enumeration_limit = enumeration_limit
        self.restarts = restarts

    def observe(self, batch, context):
        return [
            gss_iqp_observe(
                self.buffer, self.recent, x, context.gradients, context.rng,
                self.enumeration_limit, self.restarts,
            )
            for x in batch
        ]

    def flush(self, context):
        if len(self.recent):
            merge_recent(
                self.buffer, self.recent, context.gradients, context.rng,
                self.enumeration_limit, self.restarts,
            )


class ClusterStrategy(SelectionStrategy):
    """Doubling-algorithm clustering in gradient space or feature space."""

    def __init__(self, capacity: int, metric: ClusterMetric, feature_space: str = "hidden"):
        super().__init__(capacity)
        self.state = ClusterState(metric)
        self.feature_space = feature_space

    def _metric_vectors(self, batch: Sequence[Example], context: ObserveContext) -> np.ndarray:
        if self.state.metric is ClusterMetric.NORMALIZED_GRADIENTS:
            gradients = context.gradients(batch)
            norms = np.linalg.norm(gradients, axis=1, keepdims=True)
            return gradients / np.maximum(norms, EPSILON_NORM)
        if self.feature_space == "input":
            return stack_examples(batch)[0]
        return context.features(batch)

    def observe(self, batch, context):
        vectors = self._metric_vectors(batch, context)
        return [
            clust_observe(self.state, self.buffer, x, v, context.rng)
            for x, v in zip(batch, vectors)
        ]


class GradientClusterStrategy(ClusterStrategy):
    name = "gss-clust"

    def __init__(self, capacity: int):
        super().__init__(capacity, ClusterMetric.NORMALIZED_GRADIENTS)


class FeatureClusterStrategy(ClusterStrategy):
    name = "fss-clust"

    def __init__(self, capacity: int, feature_space: str = "hidden"):
        super().__init__(capacity, ClusterMetric.FEATURES, feature_space)


@dataclass(frozen=True)
class StrategyOptions:
    """Tunables forwarded to strategies that use them."""

    greedy_n: int = DEFAULT_COMPARISONS
    greedy_gate: bool = True
    recent_capacity: int = DEFAULT_RECENT_CAPACITY
    enumeration_limit: int = ENUMERATION_LIMIT
    restarts: int = RESTARTS
    fss_space: str = "hidden"


STRATEGIES: dict[str, Callable[[int, StrategyOptions], SelectionStrategy]] = {
    "none": lambda capacity, opts: NoMemory(),
    "rand": lambda capacity, opts: RandomStrategy(capacity),
    "reservoir": lambda capacity, opts: ReservoirStrategy(capacity),
    "gss-greedy": lambda capacity, opts: GreedyStrategy(capacity, opts.greedy_n, opts.greedy_gate),
    "gss-iqp": lambda capacity, opts: IqpStrategy(
        capacity, opts.recent_capacity, opts.enumeration_limit, opts.restarts,
    ),
    "gss-clust": lambda capacity, opts: GradientClusterStrategy(capacity),
    "fss-clust": lambda capacity, opts: FeatureClusterStrategy(capacity, opts.fss_space),
}


def build_strategy(
    name: str,
    capacity: int,
    options: Optional[StrategyOptions] = None,
) -> SelectionStrategy:
    """Instantiate a registered strategy by name."""
    if name not in STRATEGIES:
        raise ConfigError(f"Unknown strategy '{name}'", STRATEGIES)
    return STRATEGIES[name](capacity, options or StrategyOptions())
