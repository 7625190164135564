"""
CLI commands for running experiments.
"""
from typing import Optional

import click
import orjson
from upath import UPath

from ..log import get_logger, log_duration
from ..geometry import write_gradient_snapshot
from ..model import per_example_gradients
from ..training import AVERAGE_TASK

from .experiment import buffer_composition, load_config, run_experiment, run_single, run_sweep


def _output_dir(out: Optional[str]) -> UPath:
    from ..config import settings

    path = UPath(out) if out else settings.output_directory
    path.mkdir(parents=True, exist_ok=True)
    return path


def _overrides(pairs: tuple[str, ...]) -> dict[str, str]:
    overrides = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise click.BadParameter(f"Expected key=value, got '{pair}'", param_hint="--set")
        overrides[key.strip().lower().replace("-", "_")] = value.strip()
    return overrides


config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="key = value experiment config (defaults apply to missing keys)",
)
out_option = click.option(
    "--out",
    type=click.Path(file_okay=False),
    default=None,
    help="Output directory (default: $GSS_OUTPUT_DIRECTORY)",
)
set_option = click.option(
    "--set",
    "assignments",
    multiple=True,
    metavar="KEY=VALUE",
    help="Override a config key (repeatable)",
)


@click.command()
@config_option
@out_option
@set_option
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Parallel run processes")
def train(config_path: Optional[str], out: Optional[str], assignments: tuple[str, ...], workers: Optional[int]):
    """Run every (seed, strategy) of an experiment; write metrics.csv, summary.csv and run.json."""
    config = load_config(config_path, _overrides(assignments))
    log = get_logger(__name__, benchmark=config.benchmark, strategies=config.strategy)
    output = _output_dir(out)

    with log_duration(log, "Experiment finished", out=str(output)):
        result = run_experiment(config, workers)

    with (output / "metrics.csv").open("w") as handle:
        handle.write(result.metrics.write_csv())
    result.summary.write_csv(output / "summary.csv")
    with (output / "run.json").open("wb") as handle:
        handle.write(orjson.dumps(result.run_manifest(), option=orjson.OPT_INDENT_2))

    for row in result.summary.frame.filter(result.summary.frame["task_id"] == AVERAGE_TASK).iter_rows(named=True):
        click.echo(f"{row['strategy']}: {row['mean']:.4f} ± {row['std']:.4f}")
    try:
        result.raise_for_failures()
    except Exception as e:
        log.opt(exception=True).error("Experiment had failures", error=str(e))
        raise


@click.command()
@click.argument("key")
@click.argument("values")
@config_option
@out_option
@set_option
@click.option("--workers", type=click.IntRange(min=1), default=None)
def sweep(key: str, values: str, config_path: Optional[str], out: Optional[str],
          assignments: tuple[str, ...], workers: Optional[int]):
    """Repeat an experiment for each comma-separated VALUES of config KEY; write sweep.csv."""
    config = load_config(config_path, _overrides(assignments))
    log = get_logger(__name__, parameter=key)
    output = _output_dir(out)
    key = key.lower().replace("-", "_")

    with log_duration(log, "Sweep finished", out=str(output)):
        table, results = run_sweep(config, key, [v.strip() for v in values.split(",") if v.strip()], workers)
    with (output / "sweep.csv").open("w") as handle:
        handle.write(table.write_csv())
    click.echo(f"Wrote {output / 'sweep.csv'}")

    for result in results:
        result.raise_for_failures()


@click.command("buffer-dump")
@config_option
@out_option
@set_option
@click.option("--seed", type=int, default=None, help="Seed to run (default: first configured seed)")
@click.option("--strategy", "strategy_name", default=None, help="Strategy to run (default: first configured)")
@click.option("--gradients/--no-gradients", default=False,
              help="Also write the final-model gradients of the buffer for 'gss angle'")
def buffer_dump(config_path: Optional[str], out: Optional[str], assignments: tuple[str, ...],
                seed: Optional[int], strategy_name: Optional[str], gradients: bool):
    """Run one stream and write the final buffer, its task composition and optionally its gradients."""
    overrides = _overrides(assignments)
    if strategy_name:
        overrides["strategy"] = strategy_name
    config = load_config(config_path, overrides)
    seed = config.seeds[0] if seed is None else seed
    name = config.strategy[0]
    log = get_logger(__name__, seed=seed, strategy=name)
    output = _output_dir(out)

    try:
        result, stream = run_single(config, seed, name)
        with (output / "buffer.csv").open("w") as handle:
            handle.write(result.buffer_snapshot.write_csv())
        with (output / "composition.csv").open("w") as handle:
            handle.write(buffer_composition(result.buffer_snapshot, stream).write_csv())
        if gradients and result.memory:
            write_gradient_snapshot(
                per_example_gradients(result.model, result.memory),
                output / "gradients.csv",
                [x.stream_index for x in result.memory],
            )
    except Exception as e:
        log.opt(exception=True).error("buffer-dump failed", error=str(e))
        raise
    click.echo(f"Buffer of {len(result.memory)} examples written to {output}")
