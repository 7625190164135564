"""
Greedy scored replacement (GSS-Greedy).

Each slot keeps a score C_i = max cosine to a random subset of the buffer,
plus one so that it is nonnegative. A new example with score c takes the
place of a candidate i drawn with probability C_i / sum_j C_j, with
probability C_i / (C_i + c).
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import DegenerateVectorError
from ..geometry import EPSILON_NORM, unit
from ..model import Example, GradientVector
from .buffer import Mutation, MutationReport, ScoredBuffer

DEFAULT_COMPARISONS = 10
EMPTY_SET_SCORE = 1.0

GradientProvider = Callable[[Sequence[Example]], np.ndarray]


def greedy_score(g: GradientVector, buffer_sample_grads: Sequence[GradientVector] | np.ndarray) -> float:
    """max_i cosine(g, G_i) + 1; 1.0 for an empty comparison set."""
    direction = unit(g)
    comparisons = np.asarray(buffer_sample_grads, dtype=np.float64)
    if comparisons.size == 0:
        return EMPTY_SET_SCORE
    comparisons = np.atleast_2d(comparisons)
    norms = np.linalg.norm(comparisons, axis=1)
    if np.any(norms <= EPSILON_NORM):
        raise DegenerateVectorError("Comparison set contains a zero-norm gradient")
    cosines = np.clip((comparisons @ direction) / norms, -1.0, 1.0)
    return float(cosines.max() + 1.0)


def _candidate(scores: np.ndarray, rng: np.random.Generator) -> int:
    total = scores.sum()
    if total <= 0.0:
        return int(rng.integers(len(scores)))
    return int(rng.choice(len(scores), p=scores / total))


def gss_greedy_observe(
    buffer: ScoredBuffer,
    x: Example,
    g: GradientVector,
    n: int,
    rng: np.random.Generator,
    grad_provider: GradientProvider,
    gate: bool = True,
) -> MutationReport:
    """Offer one example (with its gradient at the current parameters) to the buffer.

    The comparison subset of n slots is drawn before x can enter. With
    ``gate`` set, a full buffer only considers examples with c < 1.
    When the candidate score and c are both 0, x replaces it with probability 1/2.
    """
    buffer.observed()

    sample_grads: np.ndarray = np.empty((0, len(g)))
    if len(buffer) > 0 and n > 0:
        subset = rng.choice(len(buffer), size=min(n, len(buffer)), replace=False)
        sample_grads = grad_provider([buffer.slots[i].example for i in subset])
        # zero gradients carry no direction to compare against
        sample_grads = sample_grads[np.linalg.norm(sample_grads, axis=1) > EPSILON_NORM]
    c = greedy_score(g, sample_grads)

    if not buffer.is_full:
        return buffer.append(x, c)
    if buffer.capacity == 0 or (gate and c >= 1.0):
        return MutationReport(Mutation.DISCARDED, evicted=(x.stream_index,))

    scores = np.array(buffer.scores, dtype=np.float64)
    i = _candidate(scores, rng)
    r = rng.random()
    c_i = scores[i]
    accept = 0.5 if c_i + c == 0.0 else c_i / (c_i + c)
    if r < accept:
        return buffer.replace(i, x, c)
    return MutationReport(Mutation.DISCARDED, evicted=(x.stream_index,))
