from .loop import (
    RunResult,
    TrainConfig,
    constrained_update,
    rehearsal_update,
    run_generators,
    run_online,
)
from .projection import (
    ConstraintSet,
    DualSolution,
    max_violation,
    project_gradient,
    solve_dual,
    solve_projection,
)
from .timeline import AVERAGE_TASK, METRICS_SCHEMA, MetricsTimeline

__all__ = [
    "AVERAGE_TASK",
    "METRICS_SCHEMA",
    "ConstraintSet",
    "DualSolution",
    "MetricsTimeline",
    "RunResult",
    "TrainConfig",
    "constrained_update",
    "max_violation",
    "project_gradient",
    "rehearsal_update",
    "run_generators",
    "run_online",
    "solve_dual",
    "solve_projection",
]
