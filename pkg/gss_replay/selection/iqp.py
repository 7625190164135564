"""
Subset selection by the cosine surrogate (GSS-IQP).

Selecting M of N candidates to minimize the summed pairwise cosines is the
binary quadratic program

    minimize  x^T G x   s.t.  1^T x = M,  x in {0, 1}^N

with G the normalized Gram matrix. Small instances are enumerated
exactly; larger ones use best-improvement single-swap local search with
seeded restarts.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt

from ..errors import InsufficientCandidatesError, ShapeError
from ..geometry import EPSILON_NORM, GradientSet, cosine_matrix
from ..log import get_logger
from ..model import Example
from .buffer import Mutation, MutationReport, RecentBuffer, ScoredBuffer, Slot
from .greedy import GradientProvider

logger = get_logger(__name__)

ENUMERATION_LIMIT = 200_000
RESTARTS = 5
DEFAULT_RECENT_CAPACITY = 50
IMPROVEMENT_TOLERANCE = 1e-12

FloatArray = npt.NDArray[np.float64]


@dataclass(frozen=True)
class IqpSolution:
    indices: tuple[int, ...]
    objective: float
    exact: bool


def selection_objective(cosines: FloatArray, indices: Sequence[int]) -> float:
    idx = np.asarray(indices, dtype=np.int64)
    return float(cosines[np.ix_(idx, idx)].sum())


def exhaustive_select(cosines: FloatArray, m: int) -> IqpSolution:
    """Exact minimum by enumerating all C(N, m) subsets."""
    n = cosines.shape[0]
    best: Optional[tuple[int, ...]] = None
    best_value = math.inf
    for combo in itertools.combinations(range(n), m):
        value = selection_objective(cosines, combo)
        if value < best_value - IMPROVEMENT_TOLERANCE:
            best, best_value = combo, value
    assert best is not None
    return IqpSolution(best, best_value, exact=True)


def _swap_descent(cosines: FloatArray, selected: np.ndarray) -> np.ndarray:
    """Apply the best single swap until no swap lowers the objective."""
    n = cosines.shape[0]
    diag = np.diag(cosines)
    mask = np.zeros(n, dtype=bool)
    mask[selected] = True
    while True:
        inside = np.flatnonzero(mask)
        outside = np.flatnonzero(~mask)
        if outside.size == 0:
            return inside
        row_sums = cosines[:, inside].sum(axis=1)
        # change in x^T G x when i (inside) is swapped for j (outside)
        delta = (
            -2.0 * row_sums[inside][:, None] + diag[inside][:, None]
            + 2.0 * row_sums[outside][None, :] - 2.0 * cosines[np.ix_(inside, outside)]
            + diag[outside][None, :]
        )
        flat = int(np.argmin(delta))
        if delta.flat[flat] >= -IMPROVEMENT_TOLERANCE:
            return inside
        i, j = np.unravel_index(flat, delta.shape)
        mask[inside[i]] = False
        mask[outside[j]] = True


def local_search_select(
    cosines: FloatArray,
    m: int,
    rng: Optional[np.random.Generator] = None,
    restarts: int = RESTARTS,
) -> IqpSolution:
    """Swap local search; the first start takes the m lowest row sums, the rest are random."""
    rng = rng if rng is not None else np.random.default_rng(0)
    n = cosines.shape[0]
    starts = [np.argsort(cosines.sum(axis=1), kind="stable")[:m]]
    starts += [rng.choice(n, size=m, replace=False) for _ in range(max(restarts - 1, 0))]

    best: Optional[np.ndarray] = None
    best_value = math.inf
    for start in starts:
        selected = _swap_descent(cosines, start)
        value = selection_objective(cosines, selected)
        if value < best_value - IMPROVEMENT_TOLERANCE:
            best, best_value = selected, value
    assert best is not None
    return IqpSolution(tuple(int(i) for i in np.sort(best)), best_value, exact=False)


def iqp_select(
    gradients: FloatArray | GradientSet,
    m: int,
    rng: Optional[np.random.Generator] = None,
    enumeration_limit: int = ENUMERATION_LIMIT,
    restarts: int = RESTARTS,
) -> IqpSolution:
    """Choose m candidate gradients minimizing the cosine surrogate."""
    gradient_set = GradientSet.of(gradients)
    n = gradient_set.size
    if m < 0:
        raise ShapeError(f"Cannot select {m} candidates")
    if n < m:
        raise InsufficientCandidatesError(f"{n} candidates for {m} slots")
    cosines = cosine_matrix(gradient_set)
    if m == n:
        return IqpSolution(tuple(range(n)), float(cosines.sum()), exact=True)
    if m == 0:
        return IqpSolution((), 0.0, exact=True)
    if math.comb(n, m) <= enumeration_limit:
        return exhaustive_select(cosines, m)
    return local_search_select(cosines, m, rng, restarts)


def _reselect(
    buffer: ScoredBuffer,
    candidates: list[Example],
    grad_provider: GradientProvider,
    rng: np.random.Generator,
    enumeration_limit: int,
    restarts: int,
) -> tuple[int, ...]:
    """Keep buffer.capacity of the candidates; gradients are recomputed now."""
    gradients = grad_provider(candidates)
    usable = np.flatnonzero(np.linalg.norm(gradients, axis=1) > EPSILON_NORM)
    if usable.size >= buffer.capacity:
        solution = iqp_select(gradients[usable], buffer.capacity, rng, enumeration_limit, restarts)
        chosen = usable[list(solution.indices)]
    else:
        # too few informative gradients: keep them all, fill with the rest in arrival order
        degenerate = np.setdiff1d(np.arange(len(candidates)), usable)
        chosen = np.concatenate([usable, degenerate[: buffer.capacity - usable.size]])
        solution = None
    logger.debug(
        "Reselected buffer",
        candidates=len(candidates),
        capacity=buffer.capacity,
        objective=None if solution is None else solution.objective,
        exact=None if solution is None else solution.exact,
    )
    kept = set(int(i) for i in chosen)
    buffer.retain([Slot(candidates[i]) for i in sorted(kept)])
    return tuple(e.stream_index for i, e in enumerate(candidates) if i not in kept)


def gss_iqp_observe(
    buffer: ScoredBuffer,
    recent: RecentBuffer,
    x: Example,
    grad_provider: GradientProvider,
    rng: np.random.Generator,
    enumeration_limit: int = ENUMERATION_LIMIT,
    restarts: int = RESTARTS,
) -> MutationReport:
    """Stage x in the recent buffer; merge and reselect when it fills up."""
    buffer.observed()
    recent.add(x)
    if not recent.is_full:
        return MutationReport(Mutation.PENDING)
    return merge_recent(buffer, recent, grad_provider, rng, enumeration_limit, restarts)


def merge_recent(
    buffer: ScoredBuffer,
    recent: RecentBuffer,
    grad_provider: GradientProvider,
    rng: np.random.Generator,
    enumeration_limit: int = ENUMERATION_LIMIT,
    restarts: int = RESTARTS,
) -> MutationReport:
    """Move pending examples into the buffer, reselecting if it overflows."""
    candidates = buffer.examples + recent.drain()
    if len(candidates) <= buffer.capacity:
        buffer.retain([*buffer.slots, *(Slot(e) for e in candidates[len(buffer):])])
        return MutationReport(Mutation.APPENDED)
    if buffer.capacity == 0:
        return MutationReport(
            Mutation.DISCARDED, evicted=tuple(e.stream_index for e in candidates)
        )
    evicted = _reselect(buffer, candidates, grad_provider, rng, enumeration_limit, restarts)
    return MutationReport(Mutation.RESELECTED, evicted=evicted)
