"""
Experiment orchestration: config -> seeded (seed, strategy) runs -> tables.

A config is a flat ``key = value`` file. Every key has a default, so an
empty file runs the desk-scale disjoint benchmark with gss-greedy over
seeds 0, 1, 2. For a given seed every strategy sees the same stream and
the same initial model.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Literal, Mapping, Optional, Sequence

import numpy as np
import polars as pl
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from upath import UPath

from .. import __version__
from ..config import read_config_file
from ..errors import ConfigError, ExperimentError
from ..log import get_logger, log_operation
from ..model import MlpModel
from ..selection import STRATEGIES, StrategyOptions, build_strategy
from ..streams import (
    Dataset,
    TaskStream,
    blurry_stream,
    disjoint_stream,
    iid_offline_stream,
    iid_stream,
    imbalanced_stream,
    load_dataset,
    permuted_stream,
)
from ..training import AVERAGE_TASK, METRICS_SCHEMA, MetricsTimeline, RunResult, TrainConfig, run_online

logger = get_logger(__name__)

BENCHMARKS = ("disjoint", "permuted", "imbalanced", "blurry", "iid", "iid-offline")
UPDATE_MODES = ("rehearsal", "constrained")
FSS_SPACES = ("hidden", "input")

# entropy keys next to the seed; run_online uses key 0 for its own generators
STREAM_KEY = 1
MODEL_KEY = 2

SUMMARY_SCHEMA = {"strategy": pl.Utf8, "task_id": pl.Utf8, "mean": pl.Float64, "std": pl.Float64}
COMPOSITION_SCHEMA = {"task_id": pl.Int64, "count": pl.UInt32}


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class ExperimentConfig(BaseModel):
    """All knobs of one experiment; unknown keys are rejected."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # stream
    dataset: str = "digits"
    benchmark: Literal["disjoint", "permuted", "imbalanced", "blurry", "iid", "iid-offline"] = "disjoint"
    n_tasks: Optional[int] = Field(None, ge=1)
    per_task_train: Optional[int] = Field(200, ge=1)
    heavy_task: int = Field(0, ge=0)
    heavy_count: int = Field(250, ge=1)
    light_count: int = Field(25, ge=1)
    swap_fraction: float = Field(0.1, ge=0.0, lt=1.0)
    epochs: int = Field(5, ge=1)

    # selection
    strategy: list[str] = Field(default_factory=lambda: ["gss-greedy"], min_length=1)
    buffer_size: int = Field(100, ge=0)
    greedy_n: int = Field(10, ge=0)
    greedy_gate: bool = True
    recent_capacity: int = Field(50, ge=1)
    enumeration_limit: int = Field(200_000, ge=1)
    restarts: int = Field(5, ge=1)
    fss_space: Literal["hidden", "input"] = "hidden"

    # model and training
    hidden_sizes: list[int] = Field(default_factory=lambda: [100, 100])
    batch_size: int = Field(10, ge=1)
    iterations_per_batch: int = Field(1, ge=1)
    learning_rate: float = Field(0.05, ge=0.0)
    rehearsal_batch_size: Optional[int] = Field(None, ge=0)
    update_mode: Literal["rehearsal", "constrained"] = "rehearsal"
    eval_interval: int = Field(100, ge=1)
    freeze_rehearsal: bool = False
    projection_tol: float = Field(1e-8, gt=0.0)

    # orchestration
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    workers: int = Field(1, ge=1)

    @field_validator("strategy", "seeds", "hidden_sizes", mode="before")
    @classmethod
    def _comma_list(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator("rehearsal_batch_size", "n_tasks", "per_task_train", mode="before")
    @classmethod
    def _optional_int(cls, value: Any) -> Any:
        if isinstance(value, str) and value.strip().lower() in ("", "none", "default"):
            return None
        return value

    @property
    def tasks(self) -> int:
        if self.n_tasks is not None:
            return self.n_tasks
        return 4 if self.benchmark == "permuted" else 5

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            iterations_per_batch=self.iterations_per_batch,
            learning_rate=self.learning_rate,
            rehearsal_batch_size=self.rehearsal_batch_size,
            update_mode=self.update_mode,
            eval_interval=self.eval_interval,
            seed=seed,
            freeze_rehearsal=self.freeze_rehearsal,
            projection_tol=self.projection_tol,
        )

    def strategy_options(self) -> StrategyOptions:
        return StrategyOptions(
            greedy_n=self.greedy_n,
            greedy_gate=self.greedy_gate,
            recent_capacity=self.recent_capacity,
            enumeration_limit=self.enumeration_limit,
            restarts=self.restarts,
            fss_space=self.fss_space,
        )

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> ExperimentConfig:
        """Validate raw (usually string) values, turning every failure into a ConfigError."""
        unknown = set(values) - set(cls.model_fields)
        if unknown:
            raise ConfigError(f"Unknown config key(s) {sorted(unknown)}", cls.model_fields)
        _check_choice("benchmark", values.get("benchmark"), BENCHMARKS)
        _check_choice("update_mode", values.get("update_mode"), UPDATE_MODES)
        _check_choice("fss_space", values.get("fss_space"), FSS_SPACES)
        for name in _split_list(values.get("strategy", [])):
            _check_choice("strategy", name, STRATEGIES)
        try:
            config = cls.model_validate(dict(values))
            config.train_config(config.seeds[0])
        except ValidationError as e:
            raise ConfigError(_describe(e)) from e
        return config


def _check_choice(key: str, value: Any, options: Iterable[str]) -> None:
    options = list(options)
    if value is not None and str(value) not in options:
        raise ConfigError(f"Unknown {key} '{value}'", options)


def _describe(error: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(p) for p in item['loc']) or 'config'}: {item['msg']}"
        for item in error.errors()
    )


def load_config(path: Optional[str | Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Read a config file (or defaults when ``path`` is None) and apply overrides."""
    values: dict[str, Any] = read_config_file(path) if path is not None else {}
    values.update(overrides or {})
    return ExperimentConfig.from_mapping(values)


# Running ----------------------------------------------------------------------


@lru_cache(maxsize=4)
def _cached_dataset(source: str) -> Dataset:
    return load_dataset(source)


def build_stream(config: ExperimentConfig, dataset: Dataset, seed: int) -> TaskStream:
    rng = np.random.default_rng(np.random.SeedSequence([seed, STREAM_KEY]))
    n_tasks = config.tasks
    if config.benchmark == "disjoint":
        return disjoint_stream(dataset, n_tasks, config.per_task_train, rng, config.batch_size)
    if config.benchmark == "iid":
        return iid_stream(dataset, n_tasks, config.per_task_train, rng, config.batch_size)
    if config.benchmark == "iid-offline":
        return iid_offline_stream(dataset, n_tasks, config.per_task_train, config.epochs, rng, config.batch_size)
    if config.benchmark == "permuted":
        return permuted_stream(dataset, n_tasks, config.per_task_train, rng, config.batch_size)
    if config.benchmark == "imbalanced":
        return imbalanced_stream(
            dataset, n_tasks, config.heavy_task, config.heavy_count, config.light_count, rng, config.batch_size,
        )
    return blurry_stream(dataset, n_tasks, config.swap_fraction, config.per_task_train, rng, config.batch_size)


def initial_model(config: ExperimentConfig, dataset: Dataset, seed: int) -> MlpModel:
    return MlpModel.initialize(
        dataset.input_dim,
        dataset.n_classes,
        hidden_sizes=config.hidden_sizes,
        learning_rate=config.learning_rate,
        rng=np.random.default_rng(np.random.SeedSequence([seed, MODEL_KEY])),
    )


def run_single(config: ExperimentConfig, seed: int, strategy_name: str) -> tuple[RunResult, TaskStream]:
    """One (seed, strategy) run, with the stream it ran on."""
    dataset = _cached_dataset(config.dataset)
    stream = build_stream(config, dataset, seed)
    model = initial_model(config, dataset, seed)
    strategy = build_strategy(strategy_name, config.buffer_size, config.strategy_options())
    return run_online(stream, strategy, model, config.train_config(seed)), stream


@dataclass
class RunRecord:
    seed: int
    strategy: str
    timeline: Optional[MetricsTimeline]
    buffer_snapshot: Optional[pl.DataFrame]
    duration_seconds: float
    max_constraint_violation: float = 0.0
    error: Optional[str] = None


def _run_job(job: tuple[ExperimentConfig, int, str]) -> RunRecord:
    config, seed, strategy_name = job
    log = get_logger(__name__, seed=seed, strategy=strategy_name, benchmark=config.benchmark)
    start = time.time()
    try:
        with log_operation(log, "run", success_msg="Run completed", error_msg="Run failed"):
            result, _ = run_single(config, seed, strategy_name)
    except Exception as e:
        return RunRecord(seed, strategy_name, None, None, round(time.time() - start, 3),
                         error=f"{type(e).__name__}: {e}")
    return RunRecord(
        seed,
        strategy_name,
        result.timeline,
        result.buffer_snapshot,
        round(time.time() - start, 3),
        result.max_constraint_violation,
    )


@dataclass(frozen=True)
class SummaryTable:
    """Mean and sample std (n-1) over seeds of the final accuracies, per strategy and task."""

    frame: pl.DataFrame

    @classmethod
    def from_metrics(cls, metrics: pl.DataFrame) -> SummaryTable:
        if metrics.height == 0:
            return cls(pl.DataFrame(schema=SUMMARY_SCHEMA))
        last = metrics.group_by(["seed", "strategy"]).agg(pl.col("examples_seen").max().alias("final_seen"))
        final = metrics.join(last, on=["seed", "strategy"]).filter(
            pl.col("examples_seen") == pl.col("final_seen")
        )
        frame = (
            final.group_by(["strategy", "task_id"], maintain_order=True)
            .agg(
                pl.col("accuracy").mean().alias("mean"),
                pl.col("accuracy").std(ddof=1).fill_null(0.0).fill_nan(0.0).alias("std"),
            )
            .sort(["strategy", pl.col("task_id") == AVERAGE_TASK, "task_id"])
            .select(list(SUMMARY_SCHEMA))
            .cast(SUMMARY_SCHEMA)
        )
        return cls(frame)

    def average(self, strategy: str) -> float:
        row = self.frame.filter((pl.col("strategy") == strategy) & (pl.col("task_id") == AVERAGE_TASK))
        if row.height == 0:
            raise KeyError(f"No summary for strategy '{strategy}'")
        return float(row["mean"][0])

    def write_csv(self, path: str | UPath) -> UPath:
        path = UPath(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as handle:
            handle.write(self.frame.write_csv())
        return path


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list[RunRecord] = field(default_factory=list)

    @property
    def failures(self) -> list[tuple[int, str, str]]:
        return [(r.seed, r.strategy, r.error) for r in self.runs if r.error is not None]

    @property
    def metrics(self) -> pl.DataFrame:
        frames = [r.timeline.to_frame() for r in self.runs if r.timeline is not None]
        return pl.concat(frames) if frames else pl.DataFrame(schema=METRICS_SCHEMA)

    @property
    def summary(self) -> SummaryTable:
        return SummaryTable.from_metrics(self.metrics)

    def raise_for_failures(self) -> None:
        if self.failures:
            raise ExperimentError(self.failures)

    def run_manifest(self) -> dict[str, Any]:
        return {
            "version": __version__,
            "config": self.config.model_dump(),
            "runs": [
                {
                    "seed": r.seed,
                    "strategy": r.strategy,
                    "duration_seconds": r.duration_seconds,
                    "max_constraint_violation": r.max_constraint_violation,
                    "error": r.error,
                }
                for r in self.runs
            ],
        }


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> ExperimentResult:
    """Every (seed, strategy) pair of ``config``; runs are independent and ordered by (strategy, seed).

    Failed runs are recorded rather than raised; call ``raise_for_failures``.
    """
    workers = workers or config.workers
    jobs = [(config, seed, name) for name in config.strategy for seed in config.seeds]
    log = get_logger(__name__, benchmark=config.benchmark, strategies=config.strategy, seeds=config.seeds)
    log.info("Starting experiment", runs=len(jobs), workers=workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_job, jobs))
    else:
        runs = [_run_job(job) for job in jobs]

    result = ExperimentResult(config, runs)
    if result.failures:
        log.error("Experiment had failed runs", failures=len(result.failures))
    return result


def buffer_composition(snapshot: pl.DataFrame, stream: TaskStream) -> pl.DataFrame:
    """Count buffered examples per hidden task id (evaluation-side analysis)."""
    tasks = pl.DataFrame(
        {"stream_index": np.arange(len(stream)), "task_id": stream.task_ids},
        schema={"stream_index": pl.Int64, "task_id": pl.Int64},
    )
    return (
        snapshot.join(tasks, on="stream_index", how="left")
        .group_by("task_id")
        .agg(pl.len().alias("count"))
        .sort("task_id")
        .cast(COMPOSITION_SCHEMA)
    )


SWEEP_SCHEMA = {"parameter": pl.Utf8, "value": pl.Utf8} | SUMMARY_SCHEMA


def run_sweep(
    config: ExperimentConfig,
    key: str,
    values: Sequence[Any],
    workers: Optional[int] = None,
) -> tuple[pl.DataFrame, list[ExperimentResult]]:
    """Repeat the experiment once per value of ``key``; rows are stacked summaries."""
    if key not in ExperimentConfig.model_fields or key in ("seeds", "workers"):
        raise ConfigError(f"Cannot sweep '{key}'", set(ExperimentConfig.model_fields) - {"seeds", "workers"})
    base = config.model_dump()
    frames, results = [], []
    for value in values:
        variant = ExperimentConfig.from_mapping(base | {key: value})
        logger.info("Sweep point", parameter=key, value=value)
        result = run_experiment(variant, workers)
        results.append(result)
        frames.append(
            result.summary.frame.with_columns(
                pl.lit(key).alias("parameter"), pl.lit(str(value)).alias("value")
            ).select(list(SWEEP_SCHEMA))
        )
    table = pl.concat(frames) if frames else pl.DataFrame(schema=SWEEP_SCHEMA)
    return table, results
