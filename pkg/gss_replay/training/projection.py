"""
Projection of an update direction onto the cone of buffer constraints.

The feasible region {v : <v, g_i> >= 0 for all i} is a polyhedral convex
cone. Its Euclidean projection is found through the dual nonnegative QP

    minimize  1/2 v^T (G G^T) v + (G g)^T v   over v >= 0

solved by cyclic coordinate descent with exact per-coordinate minimization,
after which the projected direction is g + G^T v.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from ..errors import ConvergenceError, DegenerateVectorError, ShapeError
from ..geometry import EPSILON_NORM
from ..log import get_logger
from ..model import GradientVector

logger = get_logger(__name__)

FloatArray = npt.NDArray[np.float64]

DEFAULT_TOLERANCE = 1e-8
MIN_SWEEP_CAP = 1000
SLOW_SOLVE_SWEEPS = 100


@dataclass(frozen=True)
class ConstraintSet:
    """Constraint gradients g_i, one non-degenerate row each."""

    matrix: FloatArray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ShapeError(f"Constraint matrix must be 2-D, got shape {matrix.shape}")
        if matrix.shape[0] and np.any(np.linalg.norm(matrix, axis=1) <= EPSILON_NORM):
            raise DegenerateVectorError("Constraint set contains a zero-norm gradient")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_gradients(cls, gradients: FloatArray, dimension: int | None = None) -> ConstraintSet:
        """Build from raw gradients, dropping rows too small to define a halfspace."""
        gradients = np.asarray(gradients, dtype=np.float64)
        if gradients.size == 0:
            return cls(np.empty((0, dimension if dimension is not None else 0)))
        gradients = np.atleast_2d(gradients)
        keep = np.linalg.norm(gradients, axis=1) > EPSILON_NORM
        if not keep.all():
            logger.debug("Dropped degenerate constraints", dropped=int((~keep).sum()))
        return cls(gradients[keep])

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class DualSolution:
    multipliers: FloatArray
    sweeps: int
    objective_history: list[float] = field(default_factory=list)


def sweep_cap(n_constraints: int) -> int:
    """Sweeps allowed before ``solve_dual`` gives up: 10 m^2, never fewer than MIN_SWEEP_CAP.

    The floor keeps small, badly conditioned duals (nearly parallel buffer
    gradients) from failing after a handful of sweeps.
    """
    return max(MIN_SWEEP_CAP, 10 * n_constraints * n_constraints)


def dual_objective(gram: FloatArray, linear: FloatArray, v: FloatArray) -> float:
    return float(0.5 * v @ gram @ v + linear @ v)


def solve_dual(
    gram: FloatArray,
    linear: FloatArray,
    tol: float = DEFAULT_TOLERANCE,
    max_sweeps: int | None = None,
) -> DualSolution:
    """Cyclic coordinate descent for min 1/2 v'Qv + p'v subject to v >= 0.

    Stops once a full sweep moves no coordinate by tol or more.
    """
    m = linear.shape[0]
    v = np.zeros(m)
    history = [0.0]
    if m == 0:
        return DualSolution(v, 0, history)
    cap = max_sweeps if max_sweeps is not None else sweep_cap(m)
    diagonal = np.diag(gram)
    # gradient of the dual objective, kept current as coordinates move
    residual = linear.copy()

    for sweep in range(1, cap + 1):
        largest_step = 0.0
        for i in range(m):
            updated = max(0.0, v[i] - residual[i] / diagonal[i])
            step = updated - v[i]
            if step != 0.0:
                residual += step * gram[:, i]
                v[i] = updated
                largest_step = max(largest_step, abs(step))
        history.append(dual_objective(gram, linear, v))
        if largest_step < tol:
            return DualSolution(v, sweep, history)

    raise ConvergenceError("Dual coordinate descent hit its sweep cap", largest_step, cap)


def project_gradient(
    g: GradientVector,
    constraints: ConstraintSet,
    tol: float = DEFAULT_TOLERANCE,
) -> GradientVector:
    """Euclidean projection of g onto {v : <v, g_i> >= 0 for every constraint row}."""
    return solve_projection(g, constraints, tol)[0]


def solve_projection(
    g: GradientVector,
    constraints: ConstraintSet,
    tol: float = DEFAULT_TOLERANCE,
) -> tuple[GradientVector, DualSolution]:
    g = np.asarray(g, dtype=np.float64)
    if constraints.size and g.shape != (constraints.dimension,):
        raise ShapeError(
            f"Gradient has shape {g.shape}, constraints live in dimension {constraints.dimension}"
        )
    if constraints.size > g.shape[0]:
        raise ShapeError(f"{constraints.size} constraints exceed dimension {g.shape[0]}")

    G = constraints.matrix
    if constraints.size == 0 or np.all(G @ g >= 0.0):
        return g.copy(), DualSolution(np.zeros(constraints.size), 0, [0.0])

    solution = solve_dual(G @ G.T, G @ g, tol)
    if solution.sweeps >= SLOW_SOLVE_SWEEPS:
        logger.info("Slow projection", sweeps=solution.sweeps, constraints=constraints.size)
    return g + G.T @ solution.multipliers, solution


def max_violation(direction: GradientVector, constraints: ConstraintSet) -> float:
    """Largest -<d, g_i> / (|d| |g_i|) over the constraints, or 0 when all hold."""
    if constraints.size == 0:
        return 0.0
    norm = float(np.linalg.norm(direction))
    if norm <= EPSILON_NORM:
        return 0.0
    cosines = (constraints.matrix @ direction) / (np.linalg.norm(constraints.matrix, axis=1) * norm)
    return float(max(0.0, -cosines.min()))
