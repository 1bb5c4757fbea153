import pytest

from uplink_runner import acceptance
from uplink_runner.acceptance import FIXTURES, FixtureResult, run_fixtures


def _failures(results):
    return [f"{r.fixture}: {r.criterion} observed={r.observed} expected={r.expected}" for r in results if not r.passed]


def test_fixture_table_names():
    assert set(FIXTURES) == {
        "trajectory",
        "energy",
        "cross-validation",
        "reference-points",
        "meta",
        "queueing",
        "efficiency",
        "properties",
    }


def test_result_row_layout():
    row = FixtureResult("energy", "hover power", 1371.0, 1371.3, 6.8, True).as_row()
    assert list(row) == ["fixture", "criterion", "passed", "observed", "expected", "tolerance", "detail"]
    assert row["detail"] == ""


def test_energy_fixture_passes(scenario):
    results = run_fixtures(scenario, quick=True, names=["energy"])
    assert len(results) == 7
    assert _failures(results) == []


def test_trajectory_closed_forms(scenario):
    results = acceptance.trajectory_fixture(scenario, quick=True)
    analytic = [r for r in results if r.criterion.startswith("avg_segment")]
    assert len(analytic) == 3
    assert _failures(analytic) == []


def test_raising_fixture_becomes_failed_row(scenario, monkeypatch):
    def boom(scenario, quick):
        raise ValueError("bad grid")

    monkeypatch.setitem(FIXTURES, "energy", boom)
    (result,) = run_fixtures(scenario, names=["energy"])
    assert not result.passed
    assert result.criterion == "fixture completed"
    assert result.detail == "bad grid"


@pytest.mark.slow
def test_queueing_fixture_passes(scenario):
    assert _failures(run_fixtures(scenario, quick=True, names=["queueing"])) == []


@pytest.mark.slow
def test_property_fixture_passes(scenario):
    assert _failures(run_fixtures(scenario, quick=True, names=["properties"])) == []


@pytest.mark.slow
def test_reference_points_fixture_passes(scenario):
    results = run_fixtures(scenario, names=["reference-points"])
    assert len(results) == 4
    assert _failures(results) == []


@pytest.mark.slow
def test_efficiency_fixture_passes(scenario):
    assert _failures(run_fixtures(scenario, names=["efficiency"])) == []


@pytest.mark.slow
def test_cross_validation_fixture_passes(scenario):
    assert _failures(run_fixtures(scenario, quick=True, names=["cross-validation"])) == []


def test_reference_curve_model_leaves_defaults_alone(scenario):
    reference = scenario.updated(acceptance.REFERENCE_CURVE_MODEL)
    assert reference.geometry.urdc_protection == 1.0
    assert reference.geometry.offset_clip == 2.0
    assert scenario.geometry.urdc_protection == 0.5
    assert scenario.geometry.offset_clip is None
