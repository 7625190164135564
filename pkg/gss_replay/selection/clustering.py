"""
Incremental k-center clustering by the doubling algorithm (GSS-Clust / FSS-Clust).

Buffer slots are the cluster centers. On overflow the threshold tau grows
to max(2 tau, smallest positive pairwise distance) and the centers are
re-covered greedily in arrival order until at most M remain.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import numpy.typing as npt
from scipy.spatial.distance import cdist, pdist

from ..log import get_logger
from ..model import Example
from .buffer import Mutation, MutationReport, ScoredBuffer, Slot

logger = get_logger(__name__)

FloatArray = npt.NDArray[np.float64]


class ClusterMetric(StrEnum):
    FEATURES = "euclidean-on-features"
    NORMALIZED_GRADIENTS = "euclidean-on-normalized-gradients"


@dataclass
class ClusterState:
    """Doubling threshold plus the metric vectors of the current centers.

    ``vectors[i]`` belongs to buffer slot i.
    """

    metric: ClusterMetric
    threshold: float = 0.0
    vectors: list[FloatArray] = field(default_factory=list)


def _recover(points: FloatArray, threshold: float) -> list[int]:
    """Greedy cover in arrival order: keep a point iff it is >= threshold from all kept."""
    kept: list[int] = []
    for i in range(points.shape[0]):
        if not kept or cdist(points[i:i + 1], points[kept]).min() >= threshold:
            kept.append(i)
    return kept


def _next_threshold(points: FloatArray, threshold: float) -> float:
    distances = pdist(points)
    positive = distances[distances > 0.0]
    smallest = float(positive.min()) if positive.size else 0.0
    return max(2.0 * threshold, smallest)


def clust_observe(
    state: ClusterState,
    buffer: ScoredBuffer,
    x: Example,
    metric_vector: FloatArray,
    rng: np.random.Generator | None = None,
) -> MutationReport:
    """Offer x (with its metric-space vector) to the doubling clusterer.

    ``rng`` is accepted for a uniform strategy interface; the algorithm is
    deterministic.
    """
    buffer.observed()
    vector = np.asarray(metric_vector, dtype=np.float64)
    if buffer.capacity == 0:
        return MutationReport(Mutation.DISCARDED, evicted=(x.stream_index,))
    if not buffer.is_full:
        state.vectors.append(vector)
        return buffer.append(x)

    slots = [*buffer.slots, Slot(x)]
    points = np.stack([*state.vectors, vector])
    kept = list(range(len(slots)))
    while len(kept) > buffer.capacity:
        state.threshold = _next_threshold(points[kept], state.threshold)
        if state.threshold == 0.0:
            # every remaining point coincides; one center covers them all
            kept = kept[:1]
            break
        kept = [kept[i] for i in _recover(points[kept], state.threshold)]

    kept_set = set(kept)
    buffer.retain([slots[i] for i in kept])
    state.vectors = [points[i] for i in kept]
    evicted = tuple(slot.example.stream_index for i, slot in enumerate(slots) if i not in kept_set)
    logger.debug("Consolidated centers", threshold=state.threshold, centers=len(kept))
    if len(slots) - 1 in kept_set:
        return MutationReport(Mutation.RESELECTED, evicted=evicted)
    return MutationReport(Mutation.DISCARDED, evicted=evicted)
