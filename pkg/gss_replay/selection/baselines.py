"""Task-agnostic baselines: reservoir sampling and random subset replacement."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..model import Example
from .buffer import Mutation, MutationReport, ScoredBuffer, Slot


def reservoir_observe(buffer: ScoredBuffer, x: Example, rng: np.random.Generator) -> MutationReport:
    """Vitter's algorithm R: after t items each is held with probability M/t."""
    buffer.observed()
    if buffer.capacity == 0:
        return MutationReport(Mutation.DISCARDED, evicted=(x.stream_index,))
    if not buffer.is_full:
        return buffer.append(x)
    j = int(rng.integers(buffer.seen_count))
    if j < buffer.capacity:
        return buffer.replace(j, x)
    return MutationReport(Mutation.DISCARDED, evicted=(x.stream_index,))


def rand_observe(buffer: ScoredBuffer, batch: Sequence[Example], rng: np.random.Generator) -> MutationReport:
    """Add the batch, then keep a uniformly random size-M subset of the union."""
    buffer.observed(len(batch))
    if not batch:
        return MutationReport(Mutation.APPENDED)
    union = [*buffer.slots, *(Slot(e) for e in batch)]
    if len(union) <= buffer.capacity:
        buffer.retain(union)
        return MutationReport(Mutation.APPENDED)
    keep = np.sort(rng.choice(len(union), size=buffer.capacity, replace=False))
    kept = set(int(i) for i in keep)
    buffer.retain([union[i] for i in keep])
    evicted = tuple(slot.example.stream_index for i, slot in enumerate(union) if i not in kept)
    return MutationReport(Mutation.RESELECTED, evicted=evicted)
