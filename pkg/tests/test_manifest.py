import json

import pandas as pd
import pytest

from uplink_runner.experiments import ExperimentKind, ExperimentSpec, write_csv
from uplink_runner.manifest import (
    SCHEMA_VERSION,
    ManifestError,
    RunManifest,
    csv_for,
    diff_runs,
    manifest_path_for,
    read_manifest,
    write_manifest,
)


def _store(tmp_path, name, frame, scenario):
    csv_path = tmp_path / f"{name}.csv"
    write_csv(frame, csv_path)
    manifest = RunManifest(
        tool_version="test",
        experiment=ExperimentSpec(kind=ExperimentKind.TRAJECTORY, grids={"R": "100"}),
        scenario=scenario.model_dump(mode="json"),
        csv=csv_path.name,
        columns=list(frame.columns),
        rows=len(frame),
        seed=scenario.simulation.seed,
    )
    path = manifest_path_for(csv_path)
    write_manifest(manifest, path)
    return path


def _frame(value=1.0, label="urdc"):
    return pd.DataFrame([{"scheme": label, "theta_db": 0.0, "value": value}, {"scheme": "suc", "theta_db": 10.0, "value": 0.5}])


def test_manifest_path_sits_next_to_csv(tmp_path):
    assert manifest_path_for(tmp_path / "run.csv") == tmp_path / "run.manifest.json"


def test_read_manifest_restores_experiment(tmp_path, scenario):
    path = _store(tmp_path, "run", _frame(), scenario)
    manifest = read_manifest(path)
    assert manifest.schema_version == SCHEMA_VERSION
    assert manifest.experiment.kind is ExperimentKind.TRAJECTORY
    assert manifest.experiment.grid("R") == [100.0]
    assert csv_for(manifest, path) == tmp_path / "run.csv"


def test_read_manifest_errors(tmp_path, scenario):
    with pytest.raises(ManifestError):
        read_manifest(tmp_path / "missing.manifest.json")

    broken = tmp_path / "broken.manifest.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ManifestError):
        read_manifest(broken)

    path = _store(tmp_path, "old", _frame(), scenario)
    data = json.loads(path.read_text(encoding="utf-8"))
    data["schema_version"] = SCHEMA_VERSION + 1
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ManifestError) as exc:
        read_manifest(path)
    assert "schema_version" in str(exc.value)


def test_diff_identical_runs(tmp_path, scenario):
    left = _store(tmp_path, "a", _frame(), scenario)
    right = _store(tmp_path, "b", _frame(), scenario)
    report = diff_runs(left, right)
    assert report.same_shape
    assert report.within_tolerance
    assert report.scenario_changes == {}
    assert {diff.column for diff in report.columns} == {"theta_db", "value"}


def test_diff_reports_relative_change_and_scenario_keys(tmp_path, scenario):
    left = _store(tmp_path, "a", _frame(1.0), scenario)
    right = _store(tmp_path, "b", _frame(1.001), scenario.updated({"geometry.h": 80.0}))
    report = diff_runs(left, right, tolerance=1e-6)
    assert not report.within_tolerance
    value = next(diff for diff in report.columns if diff.column == "value")
    assert value.max_abs == pytest.approx(0.001)
    assert value.row == 0
    assert report.scenario_changes["geometry.h"] == [scenario.geometry.h, 80.0]
    assert diff_runs(left, right, tolerance=1e-2).within_tolerance


def test_diff_counts_label_mismatches(tmp_path, scenario):
    left = _store(tmp_path, "a", _frame(label="urdc"), scenario)
    right = _store(tmp_path, "b", _frame(label="suc"), scenario)
    report = diff_runs(left, right)
    assert report.mismatched_labels == 1
    assert not report.within_tolerance


def test_diff_shape_mismatch(tmp_path, scenario):
    left = _store(tmp_path, "a", _frame(), scenario)
    right = _store(tmp_path, "b", _frame().iloc[:1], scenario)
    report = diff_runs(left, right)
    assert not report.same_shape
    assert not report.within_tolerance


def test_diff_rejects_negative_tolerance(tmp_path, scenario):
    path = _store(tmp_path, "a", _frame(), scenario)
    with pytest.raises(ValueError):
        diff_runs(path, path, tolerance=-1.0)
