"""
The online continual-learning loop.

Each batch is used for an update (rehearsal or constrained) against the
memory as it stood BEFORE the batch, and only then offered to the
selection strategy, with gradients taken at the post-update parameters.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Union

import numpy as np
import polars as pl
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import ShapeError
from ..log import LogProgress, get_logger
from ..model import Example, MlpModel, batch_gradient, evaluate, per_example_gradients, sgd_step
from ..selection import ObserveContext, ScoredBuffer, SelectionStrategy, rehearsal_sample
from .projection import DEFAULT_TOLERANCE, ConstraintSet, max_violation, solve_projection
from .timeline import MetricsTimeline

logger = get_logger(__name__)

UpdateMode = Literal["rehearsal", "constrained"]
Memory = Union[ScoredBuffer, Sequence[Example]]

# second entry of the seed sequence entropy; streams and model init use others
RUN_STREAM_KEY = 0


class TrainConfig(BaseModel):
    """Hyperparameters of one online run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    batch_size: int = Field(10, ge=1)
    iterations_per_batch: int = Field(1, ge=1)
    learning_rate: float = Field(0.05, ge=0.0)
    rehearsal_batch_size: Optional[int] = Field(None, ge=0)
    update_mode: UpdateMode = "rehearsal"
    eval_interval: int = Field(100, ge=1)
    seed: int = 0
    freeze_rehearsal: bool = False
    projection_tol: float = Field(DEFAULT_TOLERANCE, gt=0.0)

    @model_validator(mode="after")
    def _check_interval(self) -> TrainConfig:
        if self.eval_interval < self.batch_size:
            raise ValueError(
                f"eval_interval ({self.eval_interval}) must be >= batch_size ({self.batch_size})"
            )
        return self

    @property
    def replay_size(self) -> int:
        return self.batch_size if self.rehearsal_batch_size is None else self.rehearsal_batch_size


@dataclass
class RunResult:
    timeline: MetricsTimeline
    buffer_snapshot: pl.DataFrame
    memory: list[Example]
    model: MlpModel
    examples_seen: int
    max_constraint_violation: float = 0.0


def _memory_examples(memory: Memory) -> list[Example]:
    return memory.examples if isinstance(memory, ScoredBuffer) else list(memory)


def rehearsal_update(
    model: MlpModel,
    batch: Sequence[Example],
    memory: Memory,
    config: TrainConfig,
    rng: np.random.Generator,
) -> MlpModel:
    """SGD on the incoming batch joined with a replayed draw, one mean gradient per step."""
    examples = _memory_examples(memory)
    frozen: Optional[list[Example]] = None
    for _ in range(config.iterations_per_batch):
        if frozen is not None:
            replay = frozen
        else:
            replay = rehearsal_sample(examples, config.replay_size, rng)
            if config.freeze_rehearsal:
                frozen = replay
        combined = [*batch, *replay]
        if not combined:
            return model
        sgd_step(model, batch_gradient(model, combined), config.learning_rate)
    return model


def constrained_update(
    model: MlpModel,
    batch: Sequence[Example],
    memory: Memory,
    config: TrainConfig,
    violations: Optional[list[float]] = None,
) -> MlpModel:
    """SGD with the batch gradient projected onto the buffer's feasible cone.

    Buffer gradients are recomputed at every step. The feasibility residual
    of each projected direction is appended to ``violations`` when given.
    """
    examples = _memory_examples(memory)
    if not batch:
        return model
    for _ in range(config.iterations_per_batch):
        g = batch_gradient(model, batch)
        if examples:
            constraints = ConstraintSet.from_gradients(per_example_gradients(model, examples))
            direction, _ = solve_projection(g, constraints, config.projection_tol)
            violation = max_violation(direction, constraints)
        else:
            direction, violation = g, 0.0
        if violations is not None:
            violations.append(violation)
        sgd_step(model, direction, config.learning_rate)
    return model


def run_generators(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (rehearsal, selection) generators for one run."""
    children = np.random.SeedSequence([seed, RUN_STREAM_KEY]).spawn(2)
    return np.random.default_rng(children[0]), np.random.default_rng(children[1])


def run_online(
    stream,
    strategy: SelectionStrategy,
    model: MlpModel,
    config: TrainConfig,
) -> RunResult:
    """Train ``model`` in place on a TaskStream, driving ``strategy``.

    Evaluates on the stream's test set every ``eval_interval`` examples and
    once more at the end of the stream if that point was not just recorded.
    """
    log = get_logger(__name__, strategy=strategy.name, seed=config.seed, update_mode=config.update_mode)
    timeline = MetricsTimeline(config.seed, strategy.name, config.update_mode)
    rehearsal_rng, selection_rng = run_generators(config.seed)
    violations: list[float] = []

    def record(examples_seen: int) -> None:
        evaluation = evaluate(model, stream.test_set, stream.test_task_ids)
        timeline.record(examples_seen, evaluation)
        log.debug(
            "Evaluated model",
            examples_seen=examples_seen,
            accuracy=round(evaluation.task_average, 4),
            buffer_size=len(strategy.memory()),
        )

    seen = 0
    next_eval = config.eval_interval
    progress = LogProgress(log, total=len(stream), operation="stream", log_every=1000)
    for batch in stream.batches:
        if len(batch) > config.batch_size:
            raise ShapeError(f"Stream batch of {len(batch)} exceeds batch_size {config.batch_size}")
        memory = strategy.memory()
        if config.update_mode == "constrained":
            constrained_update(model, batch, memory, config, violations)
        else:
            rehearsal_update(model, batch, memory, config, rehearsal_rng)
        strategy.observe(batch, ObserveContext(model, selection_rng))

        seen += len(batch)
        progress.update(len(batch), buffer_size=len(strategy.memory()))
        if seen >= next_eval:
            record(seen)
            while next_eval <= seen:
                next_eval += config.eval_interval

    if seen:
        strategy.flush(ObserveContext(model, selection_rng))
        if timeline.last_examples_seen != seen:
            record(seen)
        progress.complete()

    worst = max(violations, default=0.0)
    if worst > 1e-6:
        log.warning("Constraint residual above tolerance", max_violation=worst)
    final = timeline.final
    log.info(
        "Finished run",
        examples_seen=seen,
        final_accuracy=None if final is None else round(final.task_average, 4),
        buffer_size=len(strategy.memory()),
    )
    return RunResult(
        timeline=timeline,
        buffer_snapshot=strategy.buffer.snapshot(),
        memory=strategy.memory(),
        model=model,
        examples_seen=seen,
        max_constraint_violation=worst,
    )
