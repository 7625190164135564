"""Tests for the online loop and its update rules."""

import numpy as np
import pytest
from pydantic import ValidationError

from conftest import make_dataset, make_examples
from gss_replay.errors import ConvergenceError, ShapeError
from gss_replay.model import MlpModel, batch_gradient, evaluate, sgd_step
from gss_replay.selection import build_strategy, rehearsal_sample
from gss_replay.selection.strategy import ReservoirStrategy
from gss_replay.streams import TaskStream, disjoint_stream
from gss_replay.training import (
    AVERAGE_TASK,
    MetricsTimeline,
    TrainConfig,
    constrained_update,
    rehearsal_update,
    run_generators,
    run_online,
)


@pytest.fixture
def stream(toy_dataset):
    return disjoint_stream(toy_dataset, 2, None, np.random.default_rng(0), batch_size=10)


def fresh_model(seed=0):
    return MlpModel.initialize(6, 4, hidden_sizes=(8,), rng=np.random.default_rng(seed))


def batch_and_memory():
    rng = np.random.default_rng(3)
    batch = make_examples(rng.uniform(size=(4, 6)), [0, 1, 2, 3])
    memory = make_examples(rng.uniform(size=(5, 6)), [0, 1, 2, 3, 0], start_index=100)
    return batch, memory


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def test_train_config_defaults():
    config = TrainConfig()
    assert config.batch_size == 10
    assert config.replay_size == 10
    assert TrainConfig(rehearsal_batch_size=3).replay_size == 3


def test_eval_interval_below_batch_size_is_rejected():
    with pytest.raises(ValidationError):
        TrainConfig(batch_size=10, eval_interval=5)


def test_unknown_field_is_rejected():
    with pytest.raises(ValidationError):
        TrainConfig(momentum=0.9)


def test_run_generators_are_seeded():
    a, b = run_generators(4)
    c, d = run_generators(4)
    assert a.random() == c.random()
    assert b.random() == d.random()
    e, f = run_generators(4)
    assert e.random() != f.random()


# ---------------------------------------------------------------------------
# Update rules
# ---------------------------------------------------------------------------

def test_rehearsal_with_empty_memory_is_plain_sgd():
    batch, _ = batch_and_memory()
    config = TrainConfig(learning_rate=0.1)
    model, reference = fresh_model(), fresh_model()
    rehearsal_update(model, batch, [], config, np.random.default_rng(0))
    sgd_step(reference, batch_gradient(reference, batch), 0.1)
    np.testing.assert_allclose(model.flatten(), reference.flatten())


def test_rehearsal_redraws_every_iteration():
    batch, memory = batch_and_memory()
    config = TrainConfig(learning_rate=0.1, iterations_per_batch=2, rehearsal_batch_size=2)
    model, reference = fresh_model(), fresh_model()
    rehearsal_update(model, batch, memory, config, np.random.default_rng(5))
    rng = np.random.default_rng(5)
    for _ in range(2):
        replay = rehearsal_sample(memory, 2, rng)
        sgd_step(reference, batch_gradient(reference, [*batch, *replay]), 0.1)
    np.testing.assert_allclose(model.flatten(), reference.flatten())


def test_frozen_rehearsal_reuses_first_draw():
    batch, memory = batch_and_memory()
    config = TrainConfig(
        learning_rate=0.1, iterations_per_batch=2, rehearsal_batch_size=2, freeze_rehearsal=True,
    )
    model, reference = fresh_model(), fresh_model()
    rehearsal_update(model, batch, memory, config, np.random.default_rng(5))
    replay = rehearsal_sample(memory, 2, np.random.default_rng(5))
    for _ in range(2):
        sgd_step(reference, batch_gradient(reference, [*batch, *replay]), 0.1)
    np.testing.assert_allclose(model.flatten(), reference.flatten())


def test_constrained_with_empty_memory_is_plain_sgd():
    batch, _ = batch_and_memory()
    config = TrainConfig(learning_rate=0.1, update_mode="constrained")
    model, reference = fresh_model(), fresh_model()
    violations = []
    constrained_update(model, batch, [], config, violations)
    sgd_step(reference, batch_gradient(reference, batch), 0.1)
    np.testing.assert_allclose(model.flatten(), reference.flatten())
    assert violations == [0.0]


def test_constrained_direction_respects_memory():
    batch, memory = batch_and_memory()
    config = TrainConfig(learning_rate=0.1, update_mode="constrained", iterations_per_batch=3)
    violations = []
    constrained_update(fresh_model(), batch, memory, config, violations)
    assert len(violations) == 3
    assert max(violations) <= 1e-4


def test_constrained_update_propagates_convergence_error(monkeypatch):
    monkeypatch.setattr("gss_replay.training.projection.sweep_cap", lambda m: 1)
    # same input, different labels: the two gradients point apart
    x = np.full(6, 0.5)
    batch, memory = make_examples([x], [0]), make_examples([x], [1], start_index=1)
    model = MlpModel([np.zeros((4, 6))], [np.zeros(4)])
    before = model.flatten()
    with pytest.raises(ConvergenceError):
        constrained_update(model, batch, memory, TrainConfig(update_mode="constrained"))
    np.testing.assert_array_equal(model.flatten(), before)


# ---------------------------------------------------------------------------
# Online loop
# ---------------------------------------------------------------------------

def test_empty_stream_leaves_model_and_timeline_empty(stream):
    empty = TaskStream(
        name="empty", batches=(), task_ids=np.empty(0, dtype=np.int64),
        test_set=stream.test_set, test_task_ids=stream.test_task_ids, task_labels=stream.task_labels,
    )
    model = fresh_model()
    before = model.flatten()
    result = run_online(empty, build_strategy("reservoir", 5), model, TrainConfig())
    assert result.examples_seen == 0
    assert len(result.timeline) == 0
    np.testing.assert_array_equal(model.flatten(), before)


def test_evaluation_points_follow_interval(stream):
    config = TrainConfig(eval_interval=20)
    result = run_online(stream, build_strategy("reservoir", 5), fresh_model(), config)
    assert len(stream) == 48
    assert [p.examples_seen for p in result.timeline.points] == [20, 40, 48]
    final = evaluate(result.model, stream.test_set, stream.test_task_ids)
    assert result.timeline.final == final


def test_final_point_is_not_duplicated(toy_dataset):
    stream = disjoint_stream(toy_dataset, 2, 20, np.random.default_rng(0), batch_size=10)
    result = run_online(stream, build_strategy("none", 0), fresh_model(), TrainConfig(eval_interval=20))
    assert [p.examples_seen for p in result.timeline.points] == [20, 40]


def test_oversized_batch_raises(stream):
    with pytest.raises(ShapeError):
        run_online(stream, build_strategy("none", 0), fresh_model(), TrainConfig(batch_size=5, eval_interval=10))


def test_runs_are_deterministic(stream):
    config = TrainConfig(eval_interval=20, seed=3)
    first = run_online(stream, build_strategy("gss-greedy", 6), fresh_model(), config)
    second = run_online(stream, build_strategy("gss-greedy", 6), fresh_model(), config)
    assert first.timeline.to_frame().equals(second.timeline.to_frame())
    assert first.buffer_snapshot.equals(second.buffer_snapshot)
    np.testing.assert_array_equal(first.model.flatten(), second.model.flatten())


def test_zero_capacity_reservoir_matches_no_memory(stream):
    config = TrainConfig(eval_interval=20)
    with_reservoir = run_online(stream, build_strategy("reservoir", 0), fresh_model(), config)
    without = run_online(stream, build_strategy("none", 0), fresh_model(), config)
    np.testing.assert_array_equal(with_reservoir.model.flatten(), without.model.flatten())


def test_memory_is_bounded_and_drawn_from_stream(stream):
    result = run_online(stream, build_strategy("gss-iqp", 7), fresh_model(), TrainConfig(eval_interval=20))
    assert len(result.memory) <= 7
    seen = {x.stream_index for x in stream.examples}
    assert {x.stream_index for x in result.memory} <= seen
    assert result.buffer_snapshot.height == len(result.memory)


def test_observe_runs_after_the_update(stream):
    snapshots = []

    class Spy(ReservoirStrategy):
        name = "spy"

        def observe(self, batch, context):
            snapshots.append(context.model.flatten())
            return super().observe(batch, context)

    model = fresh_model()
    initial = model.flatten()
    run_online(stream, Spy(5), model, TrainConfig(eval_interval=20))
    assert len(snapshots) == len(stream.batches)
    assert not np.array_equal(snapshots[0], initial)


def test_constrained_run_records_small_violation(stream):
    config = TrainConfig(eval_interval=20, update_mode="constrained")
    result = run_online(stream, build_strategy("reservoir", 4), fresh_model(), config)
    assert result.max_constraint_violation <= 1e-4
    assert result.timeline.update_mode == "constrained"


# ---------------------------------------------------------------------------
# Timeline
# ---------------------------------------------------------------------------

def test_timeline_frame_layout():
    dataset = make_dataset(n_per_class=5, test_per_class=2)
    model = fresh_model()
    timeline = MetricsTimeline(1, "reservoir", "rehearsal")
    timeline.record(10, evaluate(model, dataset.test, [0, 0, 0, 0, 1, 1, 1, 1]))
    frame = timeline.to_frame()
    assert frame["task_id"].to_list() == ["0", "1", AVERAGE_TASK]
    assert frame["examples_seen"].to_list() == [10, 10, 10]
    assert set(frame["seed"].to_list()) == {1}


def test_timeline_csv(tmp_path):
    timeline = MetricsTimeline(0, "none", "rehearsal")
    path = timeline.write_csv(tmp_path / "out" / "metrics.csv")
    assert path.read_text().startswith("seed,strategy,update_mode,examples_seen,task_id,accuracy")


def test_strategies_are_blind_to_task_ids(stream):
    relabelled = stream.with_task_ids(np.zeros(len(stream), dtype=np.int64))
    config = TrainConfig(eval_interval=20)
    for name in ("gss-greedy", "gss-clust"):
        original = run_online(stream, build_strategy(name, 6), fresh_model(), config)
        hidden = run_online(relabelled, build_strategy(name, 6), fresh_model(), config)
        assert original.buffer_snapshot.equals(hidden.buffer_snapshot)
        np.testing.assert_array_equal(original.model.flatten(), hidden.model.flatten())
