"""Desk-scale benchmark checks. Minutes each; run with ``pytest -m slow``."""

import numpy as np
import pytest
from click.testing import CliRunner

from gss_replay.cli import cli
from gss_replay.harness import initial_model, load_config, run_experiment
from gss_replay.model import batch_gradient, forward, loss, sgd_step
from gss_replay.streams import disjoint_stream
from gss_replay.training import TrainConfig, rehearsal_update

pytestmark = pytest.mark.slow

DESK = {
    "dataset": "digits",
    "benchmark": "disjoint",
    "per_task_train": "200",
    "buffer_size": "100",
    "seeds": "0,1,2",
}


def mean_loss(model, examples):
    return float(np.mean([loss(forward(model, x.features), x.label) for x in examples]))


def test_greedy_and_iqp_beat_random_on_disjoint_digits():
    result = run_experiment(load_config(overrides=DESK | {"strategy": "gss-greedy,gss-iqp,rand"}))
    result.raise_for_failures()
    summary = result.summary
    rand = summary.average("rand")
    assert summary.average("gss-greedy") >= rand + 0.10
    assert summary.average("gss-iqp") >= rand + 0.10


def test_greedy_beats_reservoir_on_imbalanced_sequences():
    gaps = []
    for heavy_task in range(5):
        config = load_config(overrides=DESK | {
            "benchmark": "imbalanced",
            "heavy_task": str(heavy_task),
            "strategy": "gss-greedy,reservoir",
        })
        result = run_experiment(config)
        result.raise_for_failures()
        gaps.append(result.summary.average("gss-greedy") - result.summary.average("reservoir"))
    assert np.mean(gaps) >= 0.03


def test_constrained_update_keeps_up_with_rehearsal():
    averages = {}
    for mode in ("rehearsal", "constrained"):
        result = run_experiment(load_config(overrides=DESK | {"strategy": "gss-iqp", "update_mode": mode}))
        result.raise_for_failures()
        averages[mode] = result.summary.average("gss-iqp")
        if mode == "constrained":
            assert all(r.max_constraint_violation <= 1e-6 for r in result.runs)
    assert averages["constrained"] >= averages["rehearsal"] - 0.02


def test_surrogate_tracks_solid_angle(tmp_path):
    out = tmp_path / "pairs.csv"
    result = CliRunner().invoke(
        cli,
        ["correlate", "--dim", "200", "--set-size", "4", "--trials", "100",
         "--samples", "100000", "--seed", "1", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    footer = out.read_text().strip().splitlines()[-1]
    rho = float(footer.split("rho=")[1].split(",")[0])
    assert rho >= 0.9


def test_rehearsal_protects_an_anchor_set(digits):
    """Replaying a fixed anchor set limits the loss increase on it while learning a new task."""
    config = load_config(overrides={"hidden_sizes": "100,100"})
    train = TrainConfig()
    with_replay, without_replay = [], []
    for seed in range(5):
        stream = disjoint_stream(digits, 2, 200, np.random.default_rng(seed))
        first, second = stream.examples[:200], stream.examples[200:]
        model = initial_model(config, digits, seed)
        for start in range(0, 200, 10):
            batch = first[start:start + 10]
            sgd_step(model, batch_gradient(model, batch), train.learning_rate)
        anchor = [first[i] for i in np.random.default_rng(seed).choice(200, size=50, replace=False)]
        before = mean_loss(model, anchor)

        replayed, plain = model.copy(), model.copy()
        rng = np.random.default_rng(seed)
        for start in range(0, 200, 10):
            batch = second[start:start + 10]
            rehearsal_update(replayed, batch, anchor, train, rng)
            rehearsal_update(plain, batch, [], train, rng)
        with_replay.append(mean_loss(replayed, anchor) - before)
        without_replay.append(mean_loss(plain, anchor) - before)
    assert np.mean(with_replay) <= np.mean(without_replay)
