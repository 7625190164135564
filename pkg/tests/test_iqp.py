"""Tests for surrogate-minimizing subset selection (GSS-IQP)."""

import numpy as np
import pytest

from conftest import make_examples
from gss_replay.errors import InsufficientCandidatesError
from gss_replay.geometry import cosine_matrix, surrogate
from gss_replay.selection import (
    Mutation,
    RecentBuffer,
    ScoredBuffer,
    exhaustive_select,
    gss_iqp_observe,
    iqp_select,
    local_search_select,
    merge_recent,
    selection_objective,
)


def gradients_by_index(table):
    """Gradient provider looking rows up by stream_index."""
    return lambda examples: np.stack([table[x.stream_index] for x in examples])


# ---------------------------------------------------------------------------
# Exact and approximate solvers
# ---------------------------------------------------------------------------

def test_objective_sums_the_selected_block():
    cosines = np.array([[1.0, 0.5, -1.0], [0.5, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    assert selection_objective(cosines, [0, 2]) == pytest.approx(0.0)
    assert selection_objective(cosines, [0, 1]) == pytest.approx(3.0)


def test_exhaustive_prefers_opposing_pair():
    vectors = np.array([[1.0, 0.0], [1.0, 0.1], [0.0, 1.0], [-1.0, 0.0]])
    solution = iqp_select(vectors, 2)
    assert solution.exact
    assert set(solution.indices) in ({0, 3}, {1, 3})
    assert solution.objective == pytest.approx(
        selection_objective(cosine_matrix(vectors), solution.indices)
    )


def test_select_all_and_none():
    vectors = np.random.default_rng(0).standard_normal((4, 3))
    assert iqp_select(vectors, 4).indices == (0, 1, 2, 3)
    assert iqp_select(vectors, 0).indices == ()


def test_too_few_candidates_raises():
    with pytest.raises(InsufficientCandidatesError):
        iqp_select(np.eye(3), 4)


def test_enumeration_limit_switches_to_local_search():
    vectors = np.random.default_rng(1).standard_normal((8, 5))
    solution = iqp_select(vectors, 3, rng=np.random.default_rng(0), enumeration_limit=10)
    assert not solution.exact
    assert len(solution.indices) == 3


def test_local_search_matches_enumeration_on_small_instances():
    rng = np.random.default_rng(42)
    optimal = 0
    for _ in range(100):
        cosines = cosine_matrix(rng.standard_normal((10, 30)))
        exact = exhaustive_select(cosines, 3)
        approx = local_search_select(cosines, 3, rng=rng)
        assert approx.objective >= exact.objective - 1e-9
        if approx.objective <= exact.objective + 1e-9:
            optimal += 1
    assert optimal >= 95


def test_local_search_is_reproducible():
    cosines = cosine_matrix(np.random.default_rng(3).standard_normal((30, 10)))
    first = local_search_select(cosines, 5, rng=np.random.default_rng(7))
    second = local_search_select(cosines, 5, rng=np.random.default_rng(7))
    assert first == second


# ---------------------------------------------------------------------------
# Recent-buffer merging
# ---------------------------------------------------------------------------

def test_observe_stages_until_recent_is_full(rng):
    table = np.random.default_rng(4).standard_normal((6, 4))
    examples = make_examples(np.zeros((6, 2)), [0] * 6)
    buffer, recent = ScoredBuffer(2), RecentBuffer(3)
    kinds = [gss_iqp_observe(buffer, recent, x, gradients_by_index(table), rng).kind for x in examples[:3]]
    assert kinds == [Mutation.PENDING, Mutation.PENDING, Mutation.RESELECTED]
    assert len(buffer) == 2
    assert len(recent) == 0
    assert buffer.seen_count == 3


def test_merge_without_overflow_appends(rng):
    table = np.eye(4)
    examples = make_examples(np.zeros((2, 2)), [0, 1])
    buffer, recent = ScoredBuffer(4), RecentBuffer(5)
    for x in examples:
        recent.add(x)
    report = merge_recent(buffer, recent, gradients_by_index(table), rng)
    assert report.kind is Mutation.APPENDED
    assert [x.stream_index for x in buffer.examples] == [0, 1]


def test_merge_keeps_most_diverse_examples(rng):
    # 0 and 1 are near-duplicates, 2 points the other way
    table = np.array([[1.0, 0.0], [1.0, 0.01], [-1.0, 0.0]])
    examples = make_examples(np.zeros((3, 2)), [0, 0, 1])
    buffer, recent = ScoredBuffer(2), RecentBuffer(3)
    buffer.append(examples[0])
    recent.add(examples[1])
    recent.add(examples[2])
    report = merge_recent(buffer, recent, gradients_by_index(table), rng)
    assert report.kind is Mutation.RESELECTED
    assert 2 in {x.stream_index for x in buffer.examples}
    assert len(report.evicted) == 1


def test_merge_with_zero_gradients_fills_in_arrival_order(rng):
    table = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    buffer, recent = ScoredBuffer(2), RecentBuffer(3)
    for x in make_examples(np.zeros((3, 2)), [0, 1, 2]):
        recent.add(x)
    merge_recent(buffer, recent, gradients_by_index(table), rng)
    assert [x.stream_index for x in buffer.examples] == [0, 1]


def test_merge_with_zero_capacity_discards_everything(rng):
    buffer, recent = ScoredBuffer(0), RecentBuffer(2)
    for x in make_examples(np.zeros((2, 2)), [0, 1]):
        recent.add(x)
    report = merge_recent(buffer, recent, gradients_by_index(np.eye(2)), rng)
    assert report.kind is Mutation.DISCARDED
    assert report.evicted == (0, 1)


def test_reselected_buffer_beats_random_subsets():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        table = rng.standard_normal((12, 8))
        buffer, recent = ScoredBuffer(4), RecentBuffer(12)
        for x in make_examples(np.zeros((12, 2)), [0] * 12):
            recent.add(x)
        merge_recent(buffer, recent, gradients_by_index(table), rng)
        kept = [x.stream_index for x in buffer.examples]
        best_random = min(
            surrogate(table[rng.choice(12, size=4, replace=False)]) for _ in range(1000)
        )
        assert surrogate(table[kept]) <= best_random + 1e-12
