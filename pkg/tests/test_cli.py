import argparse
import json

import pandas as pd
import pytest

from uplink_runner.cli import (
    EXIT_FAILED,
    EXIT_IO,
    EXIT_SUCCESS,
    EXIT_USAGE,
    CLIError,
    _join_negative_values,
    build_spec,
    main,
    parse_args,
)
from uplink_runner.experiments import ExperimentKind
from uplink_analysis.config import Scheme


def _exit_code(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    return exc.value.code


def _namespace(**kwargs):
    values = {
        "command": "success-sweep",
        "config": None,
        "override": [],
        "out": None,
        "seed": None,
        "trials": None,
        "scheme": "both",
        "theta_db": None,
    }
    values.update(kwargs)
    return argparse.Namespace(**values)


def test_join_negative_values_keeps_grid_values():
    argv = ["success-sweep", "--theta-db", "-20:65:1", "--seed", "3"]
    assert _join_negative_values(argv) == ["success-sweep", "--theta-db=-20:65:1", "--seed", "3"]


def test_parse_args_success_sweep_with_negative_grid():
    args = parse_args(["success-sweep", "--theta-db", "-20:65:1", "--heights", "50,100"])
    assert args.command == "success-sweep"
    assert args.theta_db == "-20:65:1"
    assert args.heights == "50,100"
    assert args.scheme == "both"  # default
    assert args.jobs == 1


def test_parse_args_rejects_two_secondary_axes():
    with pytest.raises(SystemExit):
        parse_args(["success-sweep", "--heights", "50", "--etas", "5"])


def test_parse_args_rejects_bad_grid():
    with pytest.raises(SystemExit):
        parse_args(["trajectory", "--radii", "100:50:10"])


def test_parse_args_energy_defaults():
    args = parse_args(["energy-sweep"])
    assert args.variable == "speed"
    assert args.theta_db == 20.0
    assert args.surcharge is False


def test_parse_args_diff_command():
    args = parse_args(["diff", "a.manifest.json", "b.manifest.json", "--tolerance", "1e-6"])
    assert args.command == "diff"
    assert args.left == "a.manifest.json"
    assert args.tolerance == 1e-6


def test_build_spec_collects_grids_and_schemes():
    spec = build_spec(_namespace(theta_db="0:10:5", heights="80", scheme="suc", seed=4))
    assert spec.kind is ExperimentKind.SUCCESS_SWEEP
    assert spec.grids == {"theta_db": "0:10:5", "h": "80"}
    assert spec.schemes == [Scheme.SUC]
    assert spec.seed == 4
    assert spec.grid("theta_db") == [0.0, 5.0, 10.0]


def test_build_spec_energy_options():
    spec = build_spec(
        _namespace(command="energy-sweep", values="10,20", variable="bandwidth", theta_db=15.0, surcharge=True)
    )
    assert spec.options == {"variable": "bandwidth", "theta_db": 15.0, "surcharge": True}
    assert spec.grid("value") == [10.0, 20.0]


def test_build_spec_wraps_validation_errors():
    with pytest.raises(CLIError) as exc:
        build_spec(_namespace(command="simulate", target="nothing", success=None))
    assert exc.value.exit_code == EXIT_USAGE


def test_trajectory_run_and_replay_are_identical(tmp_path, capsys):
    out = tmp_path / "tour.csv"
    code = _exit_code(
        ["trajectory", "--radii", "100", "--devices", "5,10", "--trials", "20", "--out", str(out), "--quiet"]
    )
    assert code == EXIT_SUCCESS
    summary = json.loads(capsys.readouterr().out)
    assert summary["kind"] == "trajectory"
    assert summary["rows"] == 2
    manifest = tmp_path / "tour.manifest.json"
    assert manifest.is_file()

    frame = pd.read_csv(out)
    assert list(frame["N"]) == [5.0, 10.0]
    assert frame["trials"].between(1, 20).all()

    assert _exit_code(["replay", str(manifest), "--quiet"]) == EXIT_SUCCESS
    replayed = tmp_path / "tour.replay.csv"
    assert replayed.read_bytes() == out.read_bytes()


def test_diff_of_runs(tmp_path, capsys):
    base = ["trajectory", "--radii", "200", "--devices", "8", "--trials", "10", "--quiet"]
    assert _exit_code(base + ["--out", str(tmp_path / "a.csv"), "--seed", "1"]) == EXIT_SUCCESS
    assert _exit_code(base + ["--out", str(tmp_path / "b.csv"), "--seed", "1"]) == EXIT_SUCCESS
    assert _exit_code(base + ["--out", str(tmp_path / "c.csv"), "--seed", "2"]) == EXIT_SUCCESS
    capsys.readouterr()

    left = str(tmp_path / "a.manifest.json")
    assert _exit_code(["diff", left, str(tmp_path / "b.manifest.json")]) == EXIT_SUCCESS
    report = json.loads(capsys.readouterr().out)
    assert report["within_tolerance"] is True

    assert _exit_code(["diff", left, str(tmp_path / "c.manifest.json")]) == EXIT_FAILED


def test_missing_config_reports_usage_error(tmp_path, capsys):
    code = _exit_code(["delay-table", "--config", str(tmp_path / "absent.yaml"), "--out", str(tmp_path / "d.csv")])
    assert code == EXIT_USAGE
    err = capsys.readouterr().err.strip().splitlines()[-1]
    payload = json.loads(err)
    assert payload["error"] == "config"
    assert "absent.yaml" in payload["message"]


def test_missing_output_directory_is_io_error(tmp_path, capsys):
    code = _exit_code(["trajectory", "--radii", "100", "--devices", "5", "--out", str(tmp_path / "nope" / "t.csv")])
    assert code == EXIT_IO
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "io"


def test_delay_table_for_one_scheme(tmp_path, write_config):
    config = write_config({"geometry": {"h": 100.0}})
    out = tmp_path / "delay.csv"
    code = _exit_code(
        ["delay-table", "--config", str(config), "--scheme", "urdc", "--packets", "1e6,2e6", "--out", str(out), "--quiet"]
    )
    assert code == EXIT_SUCCESS
    frame = pd.read_csv(out)
    assert list(frame["scheme"]) == ["urdc", "urdc"]
    assert (frame["h"] == 100.0).all()
    stable = frame[frame["stable"]]
    assert (stable["Q_W_slots"] >= 1.0).all()


def test_energy_sweep_at_single_speed(tmp_path):
    out = tmp_path / "energy.csv"
    code = _exit_code(
        ["energy-sweep", "--scheme", "urdc", "--values", "22", "--out", str(out), "--quiet"]
    )
    assert code == EXIT_SUCCESS
    frame = pd.read_csv(out)
    assert len(frame) == 1
    assert frame.loc[0, "P_t"] == pytest.approx(936.3, rel=0.005)
    assert frame.loc[0, "E_slot"] > 0
