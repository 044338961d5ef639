import warnings

import numpy as np
import pytest

from pointseg.datasets import PackingWarning, SynthConfig, synth_corpus
from pointseg.harness import REPORT_NOTE, LabeledTile, SweepSpec, run_epsilon_sweep, run_rate_sweep, run_sweep


@pytest.fixture(scope="module")
def corpus():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PackingWarning)
        tiles = synth_corpus(SynthConfig(height=96, width=96, nuclei=(6, 10), seed=3), 4)
    return [LabeledTile(t.image, t.instances, f"t{i}") for i, t in enumerate(tiles)]


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec("temperature", (0.0,))
    with pytest.raises(ValueError):
        SweepSpec("epsilon", ())
    with pytest.raises(ValueError):
        SweepSpec("epsilon", (0.0,), replicates=0)


def test_epsilon_zero_single_replicate(corpus):
    report = run_epsilon_sweep(SweepSpec("epsilon", (0.0,), replicates=1), corpus)
    assert len(report.rows) == 1
    row = report.rows[0]
    assert row.dice_std == 0 and row.dq_std == 0
    assert 0 <= row.dice_mean <= 1 and 0 <= row.dq_mean <= 1


def test_epsilon_zero_replicates_are_identical(corpus):
    row = run_epsilon_sweep(SweepSpec("epsilon", (0.0,), replicates=3), corpus).rows[0]
    assert len(set(row.dice_replicates)) == 1 and row.dice_std == 0


def test_sweep_deterministic(corpus):
    spec = SweepSpec("epsilon", (0.0, 1.0), replicates=2, base_seed=5)
    assert run_sweep(spec, corpus).to_csv() == run_sweep(spec, corpus).to_csv()


def test_rate_sweep_endpoints(corpus):
    report = run_rate_sweep(SweepSpec("pseudo_rate", (0.0, 0.5, 1.0), replicates=3), corpus)
    zero, half, one = report.rows
    assert zero.dice_mean == 1.0 and zero.dq_mean == 1.0 and zero.dice_std == 0
    pure = run_rate_sweep(SweepSpec("pseudo_rate", (1.0,), replicates=1), corpus).rows[0]
    assert one.dice_mean == pure.dice_mean and one.dq_mean == pure.dq_mean
    assert one.dice_std == 0
    assert pure.dice_mean <= half.dice_mean <= 1.0


def test_report_csv_has_note(corpus):
    text = run_rate_sweep(SweepSpec("pseudo_rate", (0.0,), replicates=1), corpus).to_csv()
    lines = text.splitlines()
    assert lines[0] == f"# {REPORT_NOTE}"
    assert lines[2].startswith("pseudo_rate,dice_mean")
    assert len(lines) == 4


def test_missing_ground_truth_rejected():
    with pytest.raises(ValueError):
        run_rate_sweep(SweepSpec("pseudo_rate", (0.5,)), [LabeledTile(np.zeros((4, 4, 3), np.uint8), None)])
    with pytest.raises(ValueError):
        run_epsilon_sweep(SweepSpec("epsilon", (0.5,)), [])


def test_wrong_variable_rejected(corpus):
    with pytest.raises(ValueError):
        run_epsilon_sweep(SweepSpec("pseudo_rate", (0.5,)), corpus)
