"""Shared-head accuracy of a model on a test set, grouped by task."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import EmptyInputError, ShapeError
from .mlp import Example, MlpModel, predict_logits, stack_examples


@dataclass(frozen=True)
class Evaluation:
    overall: float
    per_task: dict[int, float]

    @property
    def task_average(self) -> float:
        """Mean of per-task accuracies, or the overall accuracy without task groups."""
        if not self.per_task:
            return self.overall
        return float(np.mean(list(self.per_task.values())))


def evaluate(
    model: MlpModel,
    test_set: Sequence[Example],
    task_ids: Optional[Sequence[int]] = None,
) -> Evaluation:
    """Fraction of argmax-correct predictions over all K classes.

    ``task_ids`` (aligned with ``test_set``) groups the accuracy per task;
    tasks without test examples simply do not appear in the map.
    """
    if len(test_set) == 0:
        raise EmptyInputError("evaluate needs a nonempty test set")
    features, labels = stack_examples(test_set)
    correct = np.argmax(predict_logits(model, features), axis=1) == labels

    per_task: dict[int, float] = {}
    if task_ids is not None:
        groups = np.asarray(task_ids)
        if groups.shape != labels.shape:
            raise ShapeError(
                f"{groups.shape[0]} task ids for {labels.shape[0]} test examples"
            )
        for task in np.unique(groups):
            per_task[int(task)] = float(correct[groups == task].mean())
    return Evaluation(overall=float(correct.mean()), per_task=per_task)
