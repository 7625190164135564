"""Tests for cosine-surrogate algebra and Monte-Carlo solid angles."""

import math

import numpy as np
import polars as pl
import pytest
from click.testing import CliRunner
from hypothesis import given, settings
from hypothesis import strategies as st

from gss_replay.cli import cli
from gss_replay.errors import DegenerateVectorError, EmptyInputError, ShapeError
from gss_replay.geometry import (
    GradientSet,
    correlation_experiment,
    cosine,
    cosine_matrix,
    direction_variance,
    feasible_fraction,
    read_gradient_snapshot,
    sharded_solid_angle,
    solid_angle_mc,
    span_basis,
    surrogate,
    write_gradient_snapshot,
)

N_MC = 10**6


def within_sigma(estimate, expected, k=3.0):
    sigma = math.sqrt(expected * (1 - expected) / estimate.samples_used)
    return abs(estimate.fraction - expected) <= k * sigma


# ---------------------------------------------------------------------------
# Cosines and the surrogate
# ---------------------------------------------------------------------------

def test_cosine_basic_cases():
    assert cosine([1, 0], [0, 1]) == pytest.approx(0.0)
    assert cosine([1, 1], [2, 2]) == pytest.approx(1.0)
    assert cosine([1, 0], [-3, 0]) == pytest.approx(-1.0)


def test_cosine_rejects_zero_and_mismatched_vectors():
    with pytest.raises(DegenerateVectorError):
        cosine([0, 0], [1, 0])
    with pytest.raises(ShapeError):
        cosine([1, 0], [1, 0, 0])


def test_gradient_set_validation():
    with pytest.raises(EmptyInputError):
        GradientSet(np.empty((0, 3)))
    with pytest.raises(DegenerateVectorError):
        GradientSet(np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_surrogate_includes_diagonal():
    # orthonormal set: only the diagonal contributes
    assert surrogate(np.eye(3)) == pytest.approx(3.0)
    # identical vectors: every pair contributes one
    assert surrogate(np.ones((4, 2))) == pytest.approx(16.0)


def test_surrogate_is_scale_invariant():
    rng = np.random.default_rng(0)
    vectors = rng.standard_normal((5, 8))
    scaled = vectors * rng.uniform(0.1, 10.0, size=(5, 1))
    assert surrogate(scaled) == pytest.approx(surrogate(vectors))


def test_cosine_matrix_is_symmetric_with_unit_diagonal():
    vectors = np.random.default_rng(1).standard_normal((6, 4))
    matrix = cosine_matrix(vectors)
    np.testing.assert_allclose(matrix, matrix.T)
    np.testing.assert_allclose(np.diag(matrix), 1.0)


def test_direction_variance_extremes():
    assert direction_variance(np.ones((3, 4))) == pytest.approx(0.0, abs=1e-12)
    # a vector and its negation average to zero
    assert direction_variance(np.array([[1.0, 0.0], [-1.0, 0.0]])) == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(
    m=st.integers(min_value=1, max_value=50),
    d=st.integers(min_value=1, max_value=500),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_variance_identity(m, d, seed):
    """Variance of unit directions equals 1 - surrogate / M^2."""
    vectors = np.random.default_rng(seed).standard_normal((m, d))
    units = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    direct = float(np.mean(np.sum((units - units.mean(axis=0)) ** 2, axis=1)))
    assert abs(direct - direction_variance(vectors)) < 1e-10
    assert abs(direction_variance(vectors) - (1 - surrogate(vectors) / m**2)) < 1e-10


# ---------------------------------------------------------------------------
# Solid angle
# ---------------------------------------------------------------------------

def test_span_basis_rank():
    vectors = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    basis = span_basis(vectors)
    assert basis.shape == (2, 3)
    np.testing.assert_allclose(basis @ basis.T, np.eye(2), atol=1e-12)


def test_rank_one_set_covers_half_line():
    estimate = solid_angle_mc(np.array([[3.0, 4.0, 0.0]]), N_MC, np.random.default_rng(0))
    assert estimate.rank == 1
    assert within_sigma(estimate, 0.5)


def test_orthogonal_pair_covers_quarter():
    estimate = solid_angle_mc(np.eye(5)[:2], N_MC, np.random.default_rng(1))
    assert within_sigma(estimate, 0.25)


def test_pair_at_sixty_degrees_covers_third():
    alpha = math.pi / 3
    vectors = np.array([[1.0, 0.0, 0.0], [math.cos(alpha), math.sin(alpha), 0.0]])
    estimate = solid_angle_mc(vectors, N_MC, np.random.default_rng(2))
    assert within_sigma(estimate, 1 / 3)


def test_antipodal_pair_has_no_interior():
    estimate = solid_angle_mc(np.array([[1.0, 0.0], [-1.0, 0.0]]), 10_000, np.random.default_rng(3))
    assert estimate.fraction == 0.0


def test_solid_angle_is_reproducible_and_scale_free():
    vectors = np.random.default_rng(4).standard_normal((3, 10))
    a = solid_angle_mc(vectors, 50_000, np.random.default_rng(9))
    b = solid_angle_mc(vectors * 7.5, 50_000, np.random.default_rng(9))
    assert a.fraction == b.fraction


def test_solid_angle_ignores_per_row_scaling():
    rng = np.random.default_rng(5)
    vectors = rng.standard_normal((4, 12))
    scaled = vectors * rng.uniform(0.1, 10.0, size=(4, 1))
    a = solid_angle_mc(vectors, 50_000, np.random.default_rng(9))
    b = solid_angle_mc(scaled, 50_000, np.random.default_rng(9))
    assert a.feasible_count == b.feasible_count
    assert a.rank == b.rank == 4


def test_independent_estimates_agree():
    vectors = np.random.default_rng(10).standard_normal((5, 50))
    a = solid_angle_mc(vectors, N_MC, np.random.default_rng(11))
    b = solid_angle_mc(vectors, N_MC, np.random.default_rng(12))
    combined = math.sqrt(a.std_error**2 + b.std_error**2)
    assert abs(a.fraction - b.fraction) <= 4 * max(combined, 1.0 / N_MC)


def test_solid_angle_needs_samples():
    with pytest.raises(EmptyInputError):
        solid_angle_mc(np.eye(2), 0)


def test_sharded_estimate_is_deterministic_in_seed():
    vectors = np.eye(4)[:2]
    first = sharded_solid_angle(vectors, 200_001, seed=5, shards=3)
    second = sharded_solid_angle(vectors, 200_001, seed=5, shards=3)
    assert first.fraction == second.fraction
    assert first.samples_used == 200_001
    assert within_sigma(first, 0.25, k=4)


def test_feasible_fraction_on_explicit_directions():
    directions = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    estimate = feasible_fraction(np.eye(2), directions)
    assert estimate.fraction == pytest.approx(0.25)


def test_nested_sets_have_nested_fractions_on_shared_directions():
    rng = np.random.default_rng(6)
    vectors = rng.standard_normal((4, 6))
    directions = rng.standard_normal((20_000, 6))
    smaller = feasible_fraction(vectors[:2], directions).fraction
    larger = feasible_fraction(vectors, directions).fraction
    assert larger <= smaller


# ---------------------------------------------------------------------------
# Correlation experiment
# ---------------------------------------------------------------------------

def test_single_trial_has_no_rho():
    result = correlation_experiment(200, 2, 1, 10_000, np.random.default_rng(0))
    assert result.rho is None
    assert result.pairs.height == 1
    assert result.summary_line() == "# rho=NA,trials=1,samples=10000"


def test_correlation_is_positive_for_small_sets():
    result = correlation_experiment(20, 3, 30, 20_000, np.random.default_rng(1))
    assert result.rho is not None
    assert result.rho > 0.5


def test_correlation_csv_has_footer(tmp_path):
    result = correlation_experiment(10, 2, 12, 5_000, np.random.default_rng(2))
    path = result.write_csv(tmp_path / "pairs.csv")
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "surrogate,angle_fraction"
    assert lines[-1].startswith("# rho=")
    assert len(lines) == 12 + 2


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_correlate_command_writes_pairs(tmp_path):
    out = tmp_path / "pairs.csv"
    result = CliRunner().invoke(
        cli,
        ["correlate", "--dim", "20", "--set-size", "3", "--trials", "10",
         "--samples", "2000", "--seed", "1", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert out.exists()
    assert "# rho=" in result.output


def test_angle_command_on_rank_one_snapshot(tmp_path):
    snapshot = write_gradient_snapshot(np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]]), tmp_path / "g.csv")
    result = CliRunner().invoke(cli, ["angle", str(snapshot), "--samples", "200000", "--seed", "3"])
    assert result.exit_code == 0, result.output
    fraction = float(result.output.split("fraction=")[1].split()[0])
    assert abs(fraction - 0.5) < 3 * math.sqrt(0.25 / 200_000)


def test_gradient_snapshot_round_trip(tmp_path):
    gradients = np.random.default_rng(0).standard_normal((3, 5))
    path = write_gradient_snapshot(gradients, tmp_path / "g.csv", [10, 11, 12])
    assert pl.read_csv(path)["stream_index"].to_list() == [10, 11, 12]
    np.testing.assert_allclose(read_gradient_snapshot(path), gradients)


def test_unknown_flag_exits_with_usage():
    result = CliRunner().invoke(cli, ["correlate", "--bogus"])
    assert result.exit_code == 2
    assert "Usage" in result.output
