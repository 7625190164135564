"""
Non-i.i.d. stream construction.

A TaskStream is what the training loop iterates: batches of Examples in
stream order. Task ids are kept next to the batches for evaluation and
analysis only; nothing handed to a SelectionStrategy carries them.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt

from ..errors import DataError, ShapeError
from ..log import get_logger
from ..model import Example
from .datasets import Dataset

logger = get_logger(__name__)

IntArray = npt.NDArray[np.int64]

DEFAULT_BATCH_SIZE = 10


@dataclass(frozen=True)
class TaskStream:
    """Ordered batches plus evaluation-side task bookkeeping.

    ``task_ids[i]`` is the task of the example at stream position i.
    ``test_task_ids`` groups the test set for per-task accuracy.
    """

    name: str
    batches: tuple[tuple[Example, ...], ...]
    task_ids: IntArray
    test_set: tuple[Example, ...]
    test_task_ids: IntArray
    task_labels: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.task_ids) != len(self):
            raise ShapeError(f"{len(self.task_ids)} task ids for a stream of {len(self)}")
        if len(self.test_task_ids) != len(self.test_set):
            raise ShapeError(f"{len(self.test_task_ids)} task ids for {len(self.test_set)} test examples")

    def __len__(self) -> int:
        return sum(len(batch) for batch in self.batches)

    @property
    def n_tasks(self) -> int:
        return len(self.task_labels)

    @property
    def examples(self) -> list[Example]:
        return [x for batch in self.batches for x in batch]

    @property
    def batch_size(self) -> int:
        return max((len(batch) for batch in self.batches), default=0)

    def with_task_ids(self, task_ids: Sequence[int], test_task_ids: Optional[Sequence[int]] = None) -> TaskStream:
        """Same batches with different hidden task ids."""
        return replace(
            self,
            task_ids=np.asarray(task_ids, dtype=np.int64),
            test_task_ids=(
                self.test_task_ids if test_task_ids is None else np.asarray(test_task_ids, dtype=np.int64)
            ),
        )

    def rebatch(self, batch_size: int) -> TaskStream:
        return replace(self, batches=_batch(self.examples, batch_size))


def _batch(examples: Sequence[Example], batch_size: int) -> tuple[tuple[Example, ...], ...]:
    if batch_size < 1:
        raise ShapeError(f"batch_size must be >= 1, got {batch_size}")
    return tuple(tuple(examples[i:i + batch_size]) for i in range(0, len(examples), batch_size))


def label_groups(n_classes: int, n_tasks: int) -> tuple[tuple[int, ...], ...]:
    """Split classes 0..K-1 into n_tasks contiguous equal groups."""
    if n_tasks < 1 or n_classes % n_tasks:
        raise DataError(f"{n_classes} classes cannot be split into {n_tasks} equal tasks")
    width = n_classes // n_tasks
    return tuple(tuple(range(t * width, (t + 1) * width)) for t in range(n_tasks))


def _task_of_label(groups: tuple[tuple[int, ...], ...], n_classes: int) -> IntArray:
    lookup = np.full(n_classes, -1, dtype=np.int64)
    for task, labels in enumerate(groups):
        lookup[list(labels)] = task
    return lookup


def _assemble(
    name: str,
    dataset: Dataset,
    positions: Sequence[int],
    task_ids: Sequence[int],
    groups: tuple[tuple[int, ...], ...],
    batch_size: int,
) -> TaskStream:
    """Stream of dataset train rows in the given order, indexed by position."""
    examples = [dataset.train[row].with_index(i) for i, row in enumerate(positions)]
    lookup = _task_of_label(groups, dataset.n_classes)
    stream = TaskStream(
        name=name,
        batches=_batch(examples, batch_size),
        task_ids=np.asarray(task_ids, dtype=np.int64),
        test_set=dataset.test,
        test_task_ids=lookup[dataset.test_labels],
        task_labels=groups,
    )
    logger.debug("Built stream", stream=name, examples=len(stream), tasks=len(groups))
    return stream


def _draw_segments(
    dataset: Dataset,
    groups: tuple[tuple[int, ...], ...],
    counts: Sequence[Optional[int]],
    rng: np.random.Generator,
) -> list[IntArray]:
    """Per task, a shuffled draw without replacement from its label pool."""
    segments = []
    for task, (labels, count) in enumerate(zip(groups, counts)):
        pool = np.flatnonzero(np.isin(dataset.train_labels, labels))
        count = pool.size if count is None else count
        if count > pool.size:
            raise DataError(
                f"Task {task} (labels {list(labels)}) has {pool.size} examples, {count} requested"
            )
        segments.append(rng.choice(pool, size=count, replace=False))
    return segments


def disjoint_stream(
    dataset: Dataset,
    n_tasks: int,
    per_task_train: Optional[int],
    rng: np.random.Generator,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> TaskStream:
    """Tasks over contiguous label groups, presented one after another.

    ``per_task_train=None`` takes every example of each group.
    """
    groups = label_groups(dataset.n_classes, n_tasks)
    segments = _draw_segments(dataset, groups, [per_task_train] * n_tasks, rng)
    task_ids = np.concatenate([np.full(len(s), t) for t, s in enumerate(segments)])
    return _assemble("disjoint", dataset, np.concatenate(segments), task_ids, groups, batch_size)


def iid_stream(
    dataset: Dataset,
    n_tasks: int,
    per_task_train: Optional[int],
    rng: np.random.Generator,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> TaskStream:
    """The examples of ``disjoint_stream`` in one global shuffle."""
    groups = label_groups(dataset.n_classes, n_tasks)
    segments = _draw_segments(dataset, groups, [per_task_train] * n_tasks, rng)
    positions = np.concatenate(segments)
    task_ids = np.concatenate([np.full(len(s), t) for t, s in enumerate(segments)])
    order = rng.permutation(len(positions))
    return _assemble("iid", dataset, positions[order], task_ids[order], groups, batch_size)


def iid_offline_stream(
    dataset: Dataset,
    n_tasks: int,
    per_task_train: Optional[int],
    epochs: int,
    rng: np.random.Generator,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> TaskStream:
    """The examples of ``iid_stream`` seen for ``epochs`` passes, reshuffled every pass.

    Offline upper reference: every example comes back ``epochs`` times.
    """
    if epochs < 1:
        raise DataError(f"epochs must be >= 1, got {epochs}")
    groups = label_groups(dataset.n_classes, n_tasks)
    segments = _draw_segments(dataset, groups, [per_task_train] * n_tasks, rng)
    positions = np.concatenate(segments)
    task_ids = np.concatenate([np.full(len(s), t) for t, s in enumerate(segments)])
    orders = [rng.permutation(len(positions)) for _ in range(epochs)]
    return _assemble(
        "iid-offline",
        dataset,
        np.concatenate([positions[order] for order in orders]),
        np.concatenate([task_ids[order] for order in orders]),
        groups,
        batch_size,
    )


def imbalanced_stream(
    dataset: Dataset,
    n_tasks: int,
    heavy_task: int,
    heavy_count: int,
    light_count: int,
    rng: np.random.Generator,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> TaskStream:
    """Disjoint ordering with ``heavy_count`` examples for one task and ``light_count`` for the rest."""
    if not 0 <= heavy_task < n_tasks:
        raise DataError(f"heavy_task {heavy_task} outside [0, {n_tasks})")
    groups = label_groups(dataset.n_classes, n_tasks)
    counts = [heavy_count if t == heavy_task else light_count for t in range(n_tasks)]
    segments = _draw_segments(dataset, groups, counts, rng)
    task_ids = np.concatenate([np.full(len(s), t) for t, s in enumerate(segments)])
    return _assemble("imbalanced", dataset, np.concatenate(segments), task_ids, groups, batch_size)


def blurry_stream(
    dataset: Dataset,
    n_tasks: int,
    swap_fraction: float,
    per_task_train: Optional[int],
    rng: np.random.Generator,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> TaskStream:
    """Disjoint tasks whose segments have ``swap_fraction`` of their examples replaced.

    Replacements are drawn uniformly from the unused examples of the other
    tasks and land at uniformly random positions of the segment. When too few
    unused examples remain (``per_task_train=None`` uses them all) the rest
    come from the other tasks' segments, so an example may appear twice.
    A single task has nothing to inject. Task ids follow each example's own
    label group.
    """
    if not 0.0 <= swap_fraction < 1.0:
        raise DataError(f"swap_fraction must lie in [0, 1), got {swap_fraction}")
    groups = label_groups(dataset.n_classes, n_tasks)
    segments = _draw_segments(dataset, groups, [per_task_train] * n_tasks, rng)
    lookup = _task_of_label(groups, dataset.n_classes)

    if swap_fraction > 0.0:
        used = np.zeros(dataset.train_labels.shape[0], dtype=bool)
        for segment in segments:
            used[segment] = True
        train_tasks = lookup[dataset.train_labels]
        for task, segment in enumerate(segments):
            n_swap = int(round(swap_fraction * len(segment)))
            if n_swap == 0:
                continue
            foreign = train_tasks != task
            unused = np.flatnonzero(foreign & ~used)
            if unused.size >= n_swap:
                injected = rng.choice(unused, size=n_swap, replace=False)
            else:
                # pools exhausted: top up with rows already placed in other segments
                placed = np.flatnonzero(foreign & used)
                n_swap = min(n_swap, unused.size + placed.size)
                if n_swap == 0:
                    continue
                injected = np.concatenate(
                    [unused, rng.choice(placed, size=n_swap - unused.size, replace=False)]
                )
            slots = rng.choice(len(segment), size=n_swap, replace=False)
            used[segment[slots]] = False
            used[injected] = True
            segment[slots] = injected

    positions = np.concatenate(segments)
    task_ids = lookup[dataset.train_labels[positions]]
    return _assemble("blurry", dataset, positions, task_ids, groups, batch_size)


def permuted_stream(
    dataset: Dataset,
    n_tasks: int,
    per_task_train: Optional[int],
    rng: np.random.Generator,
    batch_size: int = DEFAULT_BATCH_SIZE,
    permutations: Optional[Sequence[Sequence[int]]] = None,
) -> TaskStream:
    """Task j feeds examples with features rearranged by a fixed permutation.

    The first permutation is the identity unless ``permutations`` is given.
    The test set is the union of the test set under every permutation.
    """
    d = dataset.input_dim
    if permutations is None:
        perms = [np.arange(d)] + [rng.permutation(d) for _ in range(n_tasks - 1)]
    else:
        perms = [np.asarray(p, dtype=np.int64) for p in permutations]
        if len(perms) != n_tasks:
            raise DataError(f"{len(perms)} permutations given for {n_tasks} tasks")
    for j, perm in enumerate(perms):
        if perm.shape != (d,) or not np.array_equal(np.sort(perm), np.arange(d)):
            raise DataError(f"Permutation {j} is not a bijection of {d} features")

    n_train = dataset.train_labels.shape[0]
    count = n_train if per_task_train is None else per_task_train
    if count > n_train:
        raise DataError(f"{n_train} training examples, {count} requested per task")

    positions, features, task_ids = [], [], []
    for j, perm in enumerate(perms):
        rows = rng.choice(n_train, size=count, replace=False)
        positions.extend(rows)
        features.extend(dataset.train_features[rows][:, perm])
        task_ids.extend([j] * count)

    examples = [
        dataset.train[row].with_features(x).with_index(i)
        for i, (row, x) in enumerate(zip(positions, features))
    ]
    test_set = tuple(x.with_features(x.features[perm]) for perm in perms for x in dataset.test)
    test_task_ids = np.repeat(np.arange(n_tasks), len(dataset.test))
    all_labels = tuple(range(dataset.n_classes))
    stream = TaskStream(
        name="permuted",
        batches=_batch(examples, batch_size),
        task_ids=np.asarray(task_ids, dtype=np.int64),
        test_set=test_set,
        test_task_ids=test_task_ids,
        task_labels=tuple(all_labels for _ in range(n_tasks)),
    )
    logger.debug("Built stream", stream="permuted", examples=len(stream), tasks=n_tasks)
    return stream
