import json

import numpy as np
import pytest
import yaml

from nmqubit import cli
from nmqubit.output import read_csv

FAST_RUN = """\
reservoir:
  r: 0.5
  kBT: 1.0
  M: 0.05
coefficients:
  dt: 0.01
  check_refinement: false
integrator:
  dt: 0.001
  t_max: 1.0
control:
  dt: 0.01
  t_max: 1.0
"""


@pytest.fixture
def run(tmp_path):
    """Write a config and call the command line with it."""

    def _run(command, extra="", *args):
        path = tmp_path / "run.yaml"
        path.write_text(FAST_RUN + extra)
        out = tmp_path / "out"
        code = cli.main(
            [command, "--config", str(path), "--out", str(out)] + list(args)
        )
        return code, out

    return _run


def test_coeffs(run, capsys):
    code, out = run("coeffs", "", "--seed", "99")
    assert code == cli.EXIT_OK
    data = read_csv(out / "coefficients.csv")
    assert data.shape == (101, 5)
    np.testing.assert_array_equal(data[0, 1:], 0.0)
    text = (out / "coefficients.csv").read_text()
    assert "master_seed: 99" in text
    echoed = yaml.safe_load(capsys.readouterr().out)
    assert echoed["integrator"]["master_seed"] == 99
    assert (out / "resolved_config.yaml").exists()


def test_coeffs_are_reproducible(run):
    _, out = run("coeffs")
    first = (out / "coefficients.csv").read_bytes()
    _, out = run("coeffs")
    assert (out / "coefficients.csv").read_bytes() == first


def test_invalid_configuration(run, capsys):
    code, out = run("coeffs", "ensemble_size: 0\n")
    assert code == cli.EXIT_CONFIG
    assert not (out / "coefficients.csv").exists()


def test_missing_configuration(tmp_path):
    code = cli.main(["coeffs", "--config", str(tmp_path / "nope.yaml")])
    assert code == cli.EXIT_IO


def test_control_without_terminal_weight(run, capsys):
    code, out = run("control", "  theta: 0.0\n")
    assert code == cli.EXIT_OK
    data = read_csv(out / "control.csv")
    assert data.shape == (101, 9)
    np.testing.assert_array_equal(data[:, 1:3], 0.0)
    assert "summary:" in capsys.readouterr().out
    assert "# summary:" in (out / "control.csv").read_text()


def test_control_not_converged(run):
    code, out = run("control", "  max_iter: 1\n")
    assert code == cli.EXIT_NOT_CONVERGED
    assert (out / "control.csv").exists()


def test_simulate(run):
    code, out = run("simulate", "policy: none\n", "--seed", "5")
    assert code == cli.EXIT_OK
    data = read_csv(out / "trajectory.csv")
    assert data.shape == (1001, 9)
    assert data[0, 7] == 0.0
    assert np.all(np.linalg.norm(data[:, 1:4], axis=1) <= 1 + 1e-9)


def test_ensemble(run):
    code, out = run("ensemble", "", "--trajectories", "4")
    assert code == cli.EXIT_OK
    data = read_csv(out / "ensemble.csv")
    assert data.shape == (1001, 9)
    meta = json.loads((out / "ensemble.json").read_text())
    assert meta["trajectory_count"] == 4
    assert meta["policy"] == "feedback"
    assert meta["configuration"]["ensemble_size"] == 4


def test_fig1(run):
    code, out = run("fig1", "scan:\n  kBT_values: [0.0, 10.0]\n")
    assert code == cli.EXIT_OK
    names = sorted(p.name for p in out.glob("fig1_*.csv"))
    assert names == [
        "fig1_markovian_kBT0.csv",
        "fig1_markovian_kBT10.csv",
        "fig1_nonmarkovian_kBT0.csv",
        "fig1_nonmarkovian_kBT10.csv",
    ]
    curve = read_csv(out / "fig1_markovian_kBT10.csv")
    assert curve.shape == (101, 2)
    assert curve[0, 1] == pytest.approx(1.0)


@pytest.mark.slow
def test_fig2_single_panel(run):
    code, out = run("fig2", "", "--preset", "fig2c", "--trajectories", "4")
    assert code == cli.EXIT_OK
    for branch in ("controlled", "uncontrolled", "markovian", "target"):
        assert (out / "fig2c_{}.csv".format(branch)).exists()
    checks = read_csv(out / "fig2_checks.csv")
    assert checks.shape == (1, 9)
    assert checks[0, 0] == 2.0
    assert checks[0, -1] == 1.0
