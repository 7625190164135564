from .cone import (
    EPSILON_NORM,
    GradientSet,
    cosine,
    cosine_matrix,
    direction_variance,
    surrogate,
    unit,
)
from .solid_angle import (
    AngleEstimate,
    CorrelationResult,
    correlation_experiment,
    feasible_fraction,
    random_unit_vectors,
    read_gradient_snapshot,
    sharded_solid_angle,
    solid_angle_mc,
    span_basis,
    write_gradient_snapshot,
)

__all__ = [
    "EPSILON_NORM",
    "AngleEstimate",
    "CorrelationResult",
    "GradientSet",
    "correlation_experiment",
    "cosine",
    "cosine_matrix",
    "direction_variance",
    "feasible_fraction",
    "random_unit_vectors",
    "read_gradient_snapshot",
    "sharded_solid_angle",
    "solid_angle_mc",
    "span_basis",
    "surrogate",
    "unit",
    "write_gradient_snapshot",
]
