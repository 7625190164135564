from .experiment import (
    BENCHMARKS,
    ExperimentConfig,
    ExperimentResult,
    RunRecord,
    SummaryTable,
    buffer_composition,
    build_stream,
    initial_model,
    load_config,
    run_experiment,
    run_single,
    run_sweep,
)

__all__ = [
    "BENCHMARKS",
    "ExperimentConfig",
    "ExperimentResult",
    "RunRecord",
    "SummaryTable",
    "buffer_composition",
    "build_stream",
    "initial_model",
    "load_config",
    "run_experiment",
    "run_single",
    "run_sweep",
]
