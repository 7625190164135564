"""
Replay-buffer state shared by every selection strategy.

ScoredBuffer is the fixed-capacity memory. Scores are only meaningful for
GSS-Greedy (cosine + 1, so within [0, 2]); other strategies store None.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum
from typing import Optional, Sequence, Union

import numpy as np
import polars as pl
from upath import UPath

from ..errors import ShapeError
from ..model import Example

MIN_SCORE = 0.0
MAX_SCORE = 2.0

SNAPSHOT_SCHEMA = {"stream_index": pl.Int64, "label": pl.Int64, "score": pl.Float64}


class Mutation(StrEnum):
    APPENDED = "appended"
    REPLACED = "replaced"
    DISCARDED = "discarded"
    PENDING = "pending"
    RESELECTED = "reselected"


@dataclass(frozen=True)
class MutationReport:
    """What an observe call did to the buffer.

    ``slot`` is the replaced slot for REPLACED; ``evicted`` lists the stream
    indices that left the buffer (or were turned away).
    """

    kind: Mutation
    slot: Optional[int] = None
    evicted: tuple[int, ...] = ()


@dataclass
class Slot:
    example: Example
    score: Optional[float] = None


def _check_score(score: Optional[float]) -> None:
    if score is not None and not MIN_SCORE <= score <= MAX_SCORE:
        raise ValueError(f"Score {score} outside [{MIN_SCORE}, {MAX_SCORE}]")


@dataclass
class ScoredBuffer:
    """Fixed-capacity replay memory of (example, score) slots."""

    capacity: int
    slots: list[Slot] = field(default_factory=list)
    seen_count: int = 0

    def __post_init__(self):
        if self.capacity < 0:
            raise ShapeError(f"Buffer capacity must be >= 0, got {self.capacity}")

    def __len__(self) -> int:
        return len(self.slots)

    @property
    def is_full(self) -> bool:
        return len(self.slots) >= self.capacity

    @property
    def examples(self) -> list[Example]:
        return [slot.example for slot in self.slots]

    @property
    def scores(self) -> list[Optional[float]]:
        return [slot.score for slot in self.slots]

    def observed(self, n: int = 1) -> None:
        self.seen_count += n

    def append(self, example: Example, score: Optional[float] = None) -> MutationReport:
        if self.is_full:
            raise ShapeError(f"Buffer is full ({self.capacity} slots)")
        _check_score(score)
        self.slots.append(Slot(example, score))
        return MutationReport(Mutation.APPENDED, slot=len(self.slots) - 1)

    def replace(self, index: int, example: Example, score: Optional[float] = None) -> MutationReport:
        _check_score(score)
        evicted = self.slots[index].example.stream_index
        self.slots[index] = Slot(example, score)
        return MutationReport(Mutation.REPLACED, slot=index, evicted=(evicted,))

    def retain(self, slots: Sequence[Slot]) -> tuple[int, ...]:
        """Replace the contents wholesale; returns stream indices that left."""
        if len(slots) > self.capacity:
            raise ShapeError(f"Cannot retain {len(slots)} slots in a buffer of {self.capacity}")
        kept = {id(slot.example) for slot in slots}
        evicted = tuple(
            slot.example.stream_index for slot in self.slots if id(slot.example) not in kept
        )
        self.slots = list(slots)
        return evicted

    def snapshot(self) -> pl.DataFrame:
        """Buffer contents as (stream_index, label, score)."""
        return pl.DataFrame(
            {
                "stream_index": [slot.example.stream_index for slot in self.slots],
                "label": [slot.example.label for slot in self.slots],
                "score": [slot.score for slot in self.slots],
            },
            schema=SNAPSHOT_SCHEMA,
        )

    def write_snapshot(self, path: str | UPath) -> UPath:
        path = UPath(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as handle:
            handle.write(self.snapshot().write_csv())
        return path


@dataclass
class RecentBuffer:
    """Staging area for incoming examples between IQP reselections."""

    capacity: int
    pending: list[Example] = field(default_factory=list)

    def __post_init__(self):
        if self.capacity < 1:
            raise ShapeError(f"Recent buffer capacity must be >= 1, got {self.capacity}")

    def __len__(self) -> int:
        return len(self.pending)

    @property
    def is_full(self) -> bool:
        return len(self.pending) >= self.capacity

    def add(self, example: Example) -> None:
        if self.is_full:
            raise ShapeError(f"Recent buffer is full ({self.capacity} examples)")
        self.pending.append(example)

    def drain(self) -> list[Example]:
        drained, self.pending = self.pending, []
        return drained


def rehearsal_sample(
    buffer: Union[ScoredBuffer, Sequence[Example]],
    k: int,
    rng: np.random.Generator,
) -> list[Example]:
    """k examples drawn uniformly without replacement (k capped at buffer size)."""
    examples = buffer.examples if isinstance(buffer, ScoredBuffer) else list(buffer)
    k = min(k, len(examples))
    if k <= 0:
        return []
    return [examples[i] for i in rng.choice(len(examples), size=k, replace=False)]
