"""
Monte-Carlo estimation of the feasible-cone solid angle.

The feasible region of a gradient set {g_i} is the polyhedral cone
{g : <g, g_i> >= 0 for all i}. Its size is measured on the unit sphere of
span({g_i}): directions are drawn uniformly on that sphere and the
fraction satisfying every constraint is the normalized spherical measure.

Directions are sampled as standard normal coordinates in an orthonormal
basis of the span. Feasibility is tested in those coordinates, which is
identical to mapping back into parameter space since the basis is
orthonormal. The sign test is scale-free, so samples are not rescaled
onto the sphere.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt
import polars as pl
from scipy.stats import spearmanr
from upath import UPath

from ..errors import DegenerateSetError, EmptyInputError
from ..log import get_logger
from .cone import GradientSet, GradientSetLike, surrogate

logger = get_logger(__name__)

FloatArray = npt.NDArray[np.float64]

RANK_TOLERANCE = 1e-10
DEFAULT_MC_SAMPLES = 10**6
SAMPLE_CHUNK = 65_536
MIN_TRIALS_FOR_RHO = 10


@dataclass(frozen=True)
class AngleEstimate:
    """Estimated fraction of the span's unit sphere inside the feasible cone."""

    fraction: float
    samples_used: int
    rank: int = 0

    @property
    def feasible_count(self) -> int:
        return int(round(self.fraction * self.samples_used))

    @property
    def std_error(self) -> float:
        return math.sqrt(self.fraction * (1.0 - self.fraction) / self.samples_used)


def span_basis(vectors: GradientSetLike) -> FloatArray:
    """Orthonormal basis (r, d) of the span, dropping singular directions
    below RANK_TOLERANCE relative to the largest.

    The set is normalized first, so positive rescaling of members leaves
    the basis unchanged.
    """
    normalized = GradientSet.of(vectors).normalized()
    _, singular_values, vt = np.linalg.svd(normalized, full_matrices=False)
    if singular_values.size == 0 or singular_values[0] <= 0.0:
        raise DegenerateSetError("Gradient set spans no direction")
    rank = int(np.sum(singular_values > RANK_TOLERANCE * singular_values[0]))
    return vt[:rank]


def feasible_fraction(vectors: GradientSetLike, directions: FloatArray) -> AngleEstimate:
    """Fraction of explicitly given ambient directions (n, d) inside the cone."""
    gradient_set = GradientSet.of(vectors)
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    if directions.shape[0] == 0:
        raise EmptyInputError("feasible_fraction needs at least one direction")
    count = int(np.sum(np.all(directions @ gradient_set.matrix.T >= 0.0, axis=1)))
    return AngleEstimate(count / directions.shape[0], directions.shape[0])


def _count_feasible(coefficients: FloatArray, n_samples: int, rng: np.random.Generator) -> int:
    rank = coefficients.shape[1]
    count = 0
    remaining = n_samples
    while remaining > 0:
        chunk = min(SAMPLE_CHUNK, remaining)
        z = rng.standard_normal((chunk, rank))
        count += int(np.sum(np.all(z @ coefficients.T >= 0.0, axis=1)))
        remaining -= chunk
    return count


def _span_coefficients(vectors: GradientSetLike) -> FloatArray:
    """Constraint normals (M, r) expressed in the span's orthonormal basis."""
    gradient_set = GradientSet.of(vectors)
    basis = span_basis(gradient_set)
    return gradient_set.normalized() @ basis.T


def solid_angle_mc(
    vectors: GradientSetLike,
    n_samples: int = DEFAULT_MC_SAMPLES,
    rng: Optional[np.random.Generator] = None,
) -> AngleEstimate:
    """Monte-Carlo estimate of the feasible fraction of span(set)'s unit sphere."""
    if n_samples < 1:
        raise EmptyInputError("solid_angle_mc needs at least one sample")
    rng = rng if rng is not None else np.random.default_rng()
    coefficients = _span_coefficients(vectors)
    count = _count_feasible(coefficients, n_samples, rng)
    return AngleEstimate(count / n_samples, n_samples, rank=coefficients.shape[1])


def sharded_solid_angle(
    vectors: GradientSetLike,
    n_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    shards: int = 4,
    max_workers: Optional[int] = None,
) -> AngleEstimate:
    """solid_angle_mc split over independently seeded sub-streams.

    Sub-stream seeds are spawned from ``seed``; the counts are summed so the
    result depends only on (seed, shards, n_samples).
    """
    if n_samples < 1:
        raise EmptyInputError("sharded_solid_angle needs at least one sample")
    coefficients = _span_coefficients(vectors)
    children = np.random.SeedSequence(seed).spawn(shards)
    sizes = [n_samples // shards + (1 if i < n_samples % shards else 0) for i in range(shards)]

    with ThreadPoolExecutor(max_workers=max_workers or shards) as pool:
        counts = list(pool.map(
            lambda job: _count_feasible(coefficients, job[0], np.random.default_rng(job[1])),
            zip(sizes, children),
        ))
    return AngleEstimate(sum(counts) / n_samples, n_samples, rank=coefficients.shape[1])


def random_unit_vectors(n: int, d: int, rng: np.random.Generator) -> FloatArray:
    vectors = rng.standard_normal((n, d))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


@dataclass(frozen=True)
class CorrelationResult:
    """Per-trial (surrogate, angle_fraction) pairs and their Spearman rank correlation."""

    pairs: pl.DataFrame
    rho: Optional[float]
    trials: int
    mc_samples: int

    def summary_line(self) -> str:
        rho = "NA" if self.rho is None else f"{self.rho:.6f}"
        return f"# rho={rho},trials={self.trials},samples={self.mc_samples}"

    def write_csv(self, path: str | UPath) -> UPath:
        """Two-column CSV followed by a one-line ``#`` summary footer."""
        path = UPath(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as handle:
            handle.write(self.pairs.write_csv())
            handle.write(self.summary_line() + "\n")
        return path


def correlation_experiment(
    d: int,
    set_size: int,
    trials: int,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    rng: Optional[np.random.Generator] = None,
) -> CorrelationResult:
    """Surrogate vs. estimated solid angle for random unit-vector sets.

    Spearman rho is reported only with at least MIN_TRIALS_FOR_RHO trials.
    """
    if trials < 1:
        raise EmptyInputError("correlation_experiment needs at least one trial")
    rng = rng if rng is not None else np.random.default_rng()

    surrogates, fractions = [], []
    for _ in range(trials):
        vectors = random_unit_vectors(set_size, d, rng)
        surrogates.append(surrogate(vectors))
        fractions.append(solid_angle_mc(vectors, mc_samples, rng).fraction)

    pairs = pl.DataFrame(
        {"surrogate": surrogates, "angle_fraction": fractions},
        schema={"surrogate": pl.Float64, "angle_fraction": pl.Float64},
    )
    rho: Optional[float] = None
    if trials >= MIN_TRIALS_FOR_RHO:
        statistic, _ = spearmanr(surrogates, fractions)
        rho = None if np.isnan(statistic) else float(statistic)
    else:
        logger.warning(
            "Too few trials for a rank correlation",
            trials=trials,
            minimum=MIN_TRIALS_FOR_RHO,
        )
    logger.info("Correlation experiment finished", d=d, set_size=set_size, trials=trials, rho=rho)
    return CorrelationResult(pairs, rho, trials, mc_samples)


GRADIENT_ID_COLUMN = "stream_index"


def write_gradient_snapshot(
    gradients: FloatArray,
    path: str | UPath,
    stream_indices: Optional[list[int]] = None,
) -> UPath:
    """One row per gradient: ``stream_index, g0, g1, ...``."""
    gradients = np.atleast_2d(np.asarray(gradients, dtype=np.float64))
    ids = stream_indices if stream_indices is not None else list(range(gradients.shape[0]))
    frame = pl.DataFrame(
        {GRADIENT_ID_COLUMN: pl.Series(ids, dtype=pl.Int64)}
        | {f"g{j}": gradients[:, j] for j in range(gradients.shape[1])}
    )
    path = UPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as handle:
        handle.write(frame.write_csv())
    return path


def read_gradient_snapshot(path: str | UPath) -> FloatArray:
    """Gradient matrix from a snapshot CSV; a ``stream_index`` column is optional."""
    with UPath(path).open("rb") as handle:
        frame = pl.read_csv(handle)
    if GRADIENT_ID_COLUMN in frame.columns:
        frame = frame.drop(GRADIENT_ID_COLUMN)
    if frame.width == 0 or frame.height == 0:
        raise EmptyInputError(f"Gradient snapshot {path} holds no vectors")
    return frame.cast(pl.Float64).to_numpy()
