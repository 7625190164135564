"""
Cosine geometry of gradient sets.

The surrogate for the feasible-cone size is the sum of pairwise cosines
over all ordered pairs, diagonal included. With the diagonal the sum
equals ``||sum_i u_i||^2`` for unit vectors u_i, which gives

    direction_variance = 1 - surrogate / M^2

exactly. The diagonal adds the constant M and never changes which subset
of a fixed size is smallest.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import numpy.typing as npt

from ..errors import DegenerateVectorError, EmptyInputError, ShapeError

EPSILON_NORM = 1e-12

FloatArray = npt.NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class GradientSet:
    """M gradient vectors of a common dimension d, all with norm > EPSILON_NORM."""

    matrix: FloatArray

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        if matrix.ndim != 2:
            raise ShapeError(f"GradientSet needs an (M, d) matrix, got shape {matrix.shape}")
        if matrix.shape[0] == 0:
            raise EmptyInputError("GradientSet needs at least one vector")
        norms = np.linalg.norm(matrix, axis=1)
        degenerate = np.flatnonzero(norms <= EPSILON_NORM)
        if degenerate.size:
            raise DegenerateVectorError(
                f"Vector {int(degenerate[0])} has norm {norms[degenerate[0]]:.3e} <= {EPSILON_NORM}"
            )
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "_norms", norms)

    @classmethod
    def of(cls, vectors: Union[GradientSet, FloatArray, Sequence[FloatArray]]) -> GradientSet:
        if isinstance(vectors, GradientSet):
            return vectors
        return cls(np.asarray(vectors, dtype=np.float64))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    @property
    def norms(self) -> FloatArray:
        return self._norms  # type: ignore[attr-defined]

    def normalized(self) -> FloatArray:
        return self.matrix / self.norms[:, None]


GradientSetLike = Union[GradientSet, FloatArray, Sequence[FloatArray]]


def unit(v: FloatArray) -> FloatArray:
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm <= EPSILON_NORM:
        raise DegenerateVectorError(f"Vector norm {norm:.3e} <= {EPSILON_NORM}")
    return v / norm


def cosine(u: FloatArray, v: FloatArray) -> float:
    """Cosine similarity, clamped to [-1, 1]."""
    u, v = np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError(f"Cannot compare vectors of shapes {u.shape} and {v.shape}")
    return float(np.clip(np.dot(unit(u), unit(v)), -1.0, 1.0))


def cosine_matrix(vectors: GradientSetLike) -> FloatArray:
    """Pairwise cosines; the normalized Gram matrix of the set."""
    normalized = GradientSet.of(vectors).normalized()
    return np.clip(normalized @ normalized.T, -1.0, 1.0)


def surrogate(vectors: GradientSetLike) -> float:
    """Sum of cosines over all ordered pairs (i, j), i == j included."""
    return float(cosine_matrix(vectors).sum())


def direction_variance(vectors: GradientSetLike) -> float:
    """Variance of the unit gradient directions, 1 - surrogate / M^2."""
    gradient_set = GradientSet.of(vectors)
    return 1.0 - surrogate(gradient_set) / gradient_set.size**2
