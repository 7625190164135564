"""Accuracy measurements recorded along a stream."""
from __future__ import annotations

from dataclasses import dataclass, field

import polars as pl
from upath import UPath

from ..model import Evaluation

AVERAGE_TASK = "avg"

METRICS_SCHEMA = {
    "seed": pl.Int64,
    "strategy": pl.Utf8,
    "update_mode": pl.Utf8,
    "examples_seen": pl.Int64,
    "task_id": pl.Utf8,
    "accuracy": pl.Float64,
}


@dataclass(frozen=True)
class EvaluationPoint:
    examples_seen: int
    evaluation: Evaluation


@dataclass
class MetricsTimeline:
    """Per-task and average test accuracy at each evaluation point of one run."""

    seed: int
    strategy: str
    update_mode: str
    points: list[EvaluationPoint] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def record(self, examples_seen: int, evaluation: Evaluation) -> None:
        self.points.append(EvaluationPoint(examples_seen, evaluation))

    @property
    def last_examples_seen(self) -> int:
        return self.points[-1].examples_seen if self.points else 0

    @property
    def final(self) -> Evaluation | None:
        return self.points[-1].evaluation if self.points else None

    def to_frame(self) -> pl.DataFrame:
        """Long format: one row per (evaluation point, task) plus an ``avg`` row."""
        rows = []
        for point in self.points:
            for task, accuracy in sorted(point.evaluation.per_task.items()):
                rows.append((point.examples_seen, str(task), accuracy))
            rows.append((point.examples_seen, AVERAGE_TASK, point.evaluation.task_average))
        return pl.DataFrame(
            {
                "seed": [self.seed] * len(rows),
                "strategy": [self.strategy] * len(rows),
                "update_mode": [self.update_mode] * len(rows),
                "examples_seen": [r[0] for r in rows],
                "task_id": [r[1] for r in rows],
                "accuracy": [r[2] for r in rows],
            },
            schema=METRICS_SCHEMA,
        )

    def write_csv(self, path: str | UPath) -> UPath:
        path = UPath(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as handle:
            handle.write(self.to_frame().write_csv())
        return path
