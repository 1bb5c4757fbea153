import pandas as pd
import pytest
from pydantic import ValidationError

from uplink_analysis.config import Scheme
from uplink_runner.experiments import (
    DELAY_COLUMNS,
    TRAJECTORY_COLUMNS,
    ExperimentKind,
    ExperimentSpec,
    db_to_linear,
    energy_variant,
    parse_grid,
    run,
    run_trajectory,
    write_csv,
)


def test_parse_grid_inclusive_range():
    points = parse_grid("-20:65:1")
    assert len(points) == 86
    assert points[0] == -20.0
    assert points[-1] == 65.0


def test_parse_grid_fractional_step_hits_endpoint():
    points = parse_grid("0.01:0.99:0.02")
    assert len(points) == 50
    assert points[-1] == pytest.approx(0.99)


def test_parse_grid_lists_and_single_values():
    assert parse_grid("25,50, 100") == [25.0, 50.0, 100.0]
    assert parse_grid("1e6") == [1e6]


@pytest.mark.parametrize("text", ["", "1:2", "0:10:0", "10:0:1", "a:b:c"])
def test_parse_grid_rejects_malformed(text):
    with pytest.raises(ValueError):
        parse_grid(text)


def test_db_to_linear():
    assert db_to_linear(0.0) == 1.0
    assert db_to_linear(20.0) == pytest.approx(100.0)


def test_spec_defaults():
    spec = ExperimentSpec(kind=ExperimentKind.META)
    assert spec.schemes == [Scheme.URDC, Scheme.SUC]
    assert spec.grid("theta_db") == [10.0]
    assert len(spec.grid("X")) == 50
    with pytest.raises(KeyError):
        spec.grid("packets")


def test_spec_rejects_two_secondary_axes():
    with pytest.raises(ValidationError):
        ExperimentSpec(kind=ExperimentKind.SUCCESS_SWEEP, grids={"h": "50", "eta": "5"})


def test_spec_rejects_bad_options():
    with pytest.raises(ValidationError):
        ExperimentSpec(kind=ExperimentKind.ENERGY_SWEEP, options={"variable": "altitude"})
    with pytest.raises(ValidationError):
        ExperimentSpec(kind=ExperimentKind.SIMULATE, options={"target": "energy"})
    with pytest.raises(ValidationError):
        ExperimentSpec(kind=ExperimentKind.TRAJECTORY, trials=0)
    with pytest.raises(ValidationError):
        ExperimentSpec(kind=ExperimentKind.TRAJECTORY, grids={"R": "100:50:10"})
    with pytest.raises(ValidationError):
        ExperimentSpec(kind=ExperimentKind.TRAJECTORY, schemes=[])


def test_spec_is_frozen():
    spec = ExperimentSpec(kind=ExperimentKind.TRAJECTORY)
    with pytest.raises(ValidationError):
        spec.trials = 5


def test_energy_variant_applies_the_swept_quantity(scenario):
    assert energy_variant(scenario, "bandwidth", 2e6).traffic.W == 2e6
    assert energy_variant(scenario, "power", 30.0).channel.P == pytest.approx(1.0)
    faster = energy_variant(scenario, "speed", 15.0)
    assert faster.kinematics.v == 15.0
    ratio = scenario.traffic.t_DC / scenario.traffic.t_V
    assert faster.traffic.t_DC / faster.traffic.t_V == pytest.approx(ratio)
    with pytest.raises(ValueError):
        energy_variant(scenario, "altitude", 1.0)


def test_trajectory_rows_follow_grid_order(scenario):
    spec = ExperimentSpec(kind=ExperimentKind.TRAJECTORY, grids={"R": "100,200", "N": "25"}, trials=50)
    frame = run_trajectory(spec, scenario)
    assert list(frame.columns) == TRAJECTORY_COLUMNS
    assert list(frame["R"]) == [100.0, 200.0]
    # the exact average scales linearly with the cell radius
    assert frame["analytic_exact"].iloc[1] == pytest.approx(2.0 * frame["analytic_exact"].iloc[0])
    assert (frame["analytic_poisson"] >= frame["analytic_jensen"]).all()


def test_delay_table_for_reliable_links(scenario):
    spec = ExperimentSpec(kind=ExperimentKind.DELAY_TABLE, grids={"packets": "1e6"}, schemes=[Scheme.URDC])
    frame = run(spec, scenario)
    assert list(frame.columns) == DELAY_COLUMNS
    assert len(frame) == 1
    row = frame.iloc[0]
    assert 0.0 < row["S_p"] <= 1.0
    if row["stable"]:
        assert row["Q_W_seconds"] == pytest.approx(row["Q_W_slots"] * scenario.traffic.T_s)


def test_write_csv_uses_unix_newlines(tmp_path):
    path = tmp_path / "rows.csv"
    write_csv(pd.DataFrame([{"a": 1, "b": 2.5}]), path)
    assert path.read_bytes() == b"a,b\n1,2.5\n"
