"""
CLI commands for the cone-geometry experiments.
"""
from typing import Optional

import click
import numpy as np

from ..log import get_logger, log_duration

from .solid_angle import (
    DEFAULT_MC_SAMPLES,
    correlation_experiment,
    read_gradient_snapshot,
    sharded_solid_angle,
    solid_angle_mc,
)


@click.command()
@click.option("--dim", type=click.IntRange(min=1), default=200, show_default=True, help="Ambient dimension d")
@click.option("--set-size", type=click.IntRange(min=1), default=4, show_default=True, help="Vectors per random set")
@click.option("--trials", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--samples", type=click.IntRange(min=1), default=DEFAULT_MC_SAMPLES, show_default=True,
              help="Monte-Carlo directions per trial")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default="pairs.csv", show_default=True, help="Output CSV path")
def correlate(dim: int, set_size: int, trials: int, samples: int, seed: int, out: str):
    """Rank correlation between the cosine surrogate and the feasible solid angle.

    Writes surrogate,angle_fraction pairs and a '# rho=...' footer line.
    """
    log = get_logger(__name__, dim=dim, set_size=set_size, trials=trials)
    try:
        with log_duration(log, "Correlation pairs written", out=out):
            result = correlation_experiment(dim, set_size, trials, samples, np.random.default_rng(seed))
            path = result.write_csv(out)
        click.echo(result.summary_line())
        click.echo(f"Wrote {path}")
    except Exception as e:
        log.opt(exception=True).error("correlate failed", error=str(e))
        raise


@click.command()
@click.argument("snapshot", type=click.Path(exists=True, dir_okay=False))
@click.option("--samples", type=click.IntRange(min=1), default=DEFAULT_MC_SAMPLES, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--shards", type=click.IntRange(min=1), default=None,
              help="Split sampling over this many threads")
def angle(snapshot: str, samples: int, seed: int, shards: Optional[int]):
    """Feasible solid-angle fraction of the gradients in SNAPSHOT (CSV)."""
    log = get_logger(__name__, snapshot=snapshot)
    vectors = read_gradient_snapshot(snapshot)
    if shards:
        estimate = sharded_solid_angle(vectors, samples, seed=seed, shards=shards)
    else:
        estimate = solid_angle_mc(vectors, samples, np.random.default_rng(seed))
    log.info("Estimated solid angle", fraction=estimate.fraction, rank=estimate.rank, samples=samples)
    click.echo(
        f"fraction={estimate.fraction:.6f} std_error={estimate.std_error:.6f} "
        f"rank={estimate.rank} samples={estimate.samples_used}"
    )
