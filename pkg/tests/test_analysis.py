import math

import numpy as np
import pytest

from uplink_analysis.analysis import (
    LinkAnalyzer,
    alzer_factor,
    capacity_from_success,
    evaluate_success,
    geometry_nodes,
    interference_field,
    laplace_exponent,
    laplace_interference,
    optimal_altitude,
    outage_capacity,
    success_probability_suc,
    success_probability_suc_cell_stats,
    success_probability_urdc,
)
from uplink_analysis.channel import LinkState
from uplink_analysis.config import Scheme, derive
from uplink_analysis.quadrature import DEFAULT_QUADRATURE, half_normal_nodes


def _db(value: float) -> float:
    return 10.0 ** (value / 10.0)


def test_interference_fields(scenario):
    derived = derive(scenario)
    urdc = interference_field(scenario, Scheme.URDC)
    suc = interference_field(scenario, Scheme.SUC)
    assert urdc.intensity == pytest.approx(derived.lambda_DC)
    assert urdc.exclusion_radius == pytest.approx(scenario.geometry.R / 2)
    assert suc.intensity == pytest.approx(derived.lambda_UC)
    assert suc.exclusion_radius == pytest.approx(scenario.geometry.R)


def test_interference_field_protection_is_configurable(scenario):
    wide = scenario.updated({"geometry.urdc_protection": 1.0, "geometry.suc_protection": 1.5})
    assert interference_field(wide, Scheme.URDC).exclusion_radius == pytest.approx(scenario.geometry.R)
    assert interference_field(wide, Scheme.SUC).exclusion_radius == pytest.approx(1.5 * scenario.geometry.R)
    # fewer nearby interferers can only help
    assert success_probability_urdc(wide, _db(50.0)).value > success_probability_urdc(scenario, _db(50.0)).value


def test_laplace_transform_properties(scenario):
    field = interference_field(scenario, Scheme.URDC)
    assert laplace_exponent(field, 0.0, LinkState.LOS, DEFAULT_QUADRATURE) == (0.0, 0.0)
    grid = [0.0, 1e6, 1e8, 1e10, 1e12]
    for component in (LinkState.LOS, LinkState.NLOS):
        values = [laplace_interference(field, s, component) for s in grid]
        assert values[0] == 1.0
        assert all(0.0 < v <= 1.0 for v in values)
        assert np.all(np.diff(values) <= 0.0)
    with pytest.raises(ValueError):
        laplace_interference(field, -1.0, LinkState.LOS)


def test_alzer_factor():
    assert alzer_factor(1) == 1.0
    assert alzer_factor(3) == pytest.approx(3.0 * 6.0 ** (-1.0 / 3.0))


def test_rayleigh_conditional_collapses_to_single_exponential(scenario):
    link = LinkAnalyzer(scenario, Scheme.URDC)
    values, _ = link.exponential_terms(LinkState.NLOS, 15.0, 100.0, 1)
    value, _ = link.conditional(LinkState.NLOS, 15.0, 100.0)
    assert value == pytest.approx(values[1], abs=1e-15)


def test_geometry_nodes_are_normalized(scenario):
    for scheme in (Scheme.URDC, Scheme.SUC):
        nodes, weights = geometry_nodes(scenario, scheme)
        assert weights.sum() == pytest.approx(1.0)
        assert np.all(nodes >= 0.0)


def test_clipped_offsets_stay_normalized(scenario):
    clipped = scenario.updated({"geometry.offset_clip": 2.0})
    nodes, weights = geometry_nodes(clipped, Scheme.URDC)
    assert weights.sum() == pytest.approx(1.0, abs=1e-9)
    assert nodes.max() <= 2.0 * scenario.geometry.eta
    with pytest.raises(ValueError):
        half_normal_nodes(20.0, clip=0.0)


def test_disc_cell_average(scenario):
    disc = scenario.updated({"geometry.cell_shape": "disc"})
    nodes, weights = geometry_nodes(disc, Scheme.SUC)
    assert nodes.max() <= scenario.geometry.R
    assert weights.sum() == pytest.approx(1.0)
    full = success_probability_suc_cell_stats(disc, 1.0, n_positions=100).value
    inner = success_probability_suc_cell_stats(disc.updated({"geometry.disc_scale": 0.8}), 1.0, n_positions=100).value
    # devices nearer the centre see a stronger link
    assert inner > full


def test_urdc_success_is_a_probability_and_monotone(scenario):
    values = [success_probability_urdc(scenario, _db(t)).value for t in (0.0, 20.0, 40.0, 60.0)]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert np.all(np.diff(values) <= 1e-12)


def test_urdc_default_threshold_comes_from_timing(scenario):
    theta = derive(scenario).theta_DC
    assert success_probability_urdc(scenario).value == pytest.approx(
        success_probability_urdc(scenario, theta).value
    )


def test_zero_offset_collapses_to_overhead_link(scenario):
    still = scenario.updated({"geometry.eta": 0.0})
    value, _ = LinkAnalyzer(still, Scheme.URDC).success(0.0, 100.0)
    assert success_probability_urdc(still, 100.0).value == pytest.approx(value)


def test_interference_limited_saturation(scenario):
    loud = success_probability_urdc(scenario.updated({"channel.P": 1e6}), 100.0).value
    noiseless = success_probability_urdc(scenario.updated({"channel.sigma2": 0.0}), 100.0).value
    assert loud == pytest.approx(noiseless, abs=1e-6)


def test_suc_single_position_validation(scenario):
    estimate = success_probability_suc(scenario, 1.0, 300.0)
    assert 0.0 <= estimate.value <= 1.0
    with pytest.raises(ValueError):
        success_probability_suc(scenario, 1.0, -1.0)
    with pytest.raises(ValueError):
        success_probability_suc(scenario, 0.0, 300.0)


def test_suc_cell_stats(scenario):
    stats = success_probability_suc_cell_stats(scenario, 1.0, n_positions=100)
    assert 0.0 <= stats.value <= 1.0
    assert stats.sd >= 0.0
    with pytest.raises(ValueError):
        success_probability_suc_cell_stats(scenario, 1.0, n_positions=50)


def test_urdc_beats_suc_at_matched_threshold(scenario):
    spec = scenario.numerics.model_copy(update={"cell_positions": 100})
    for theta_db in (0.0, 20.0):
        urdc = evaluate_success(scenario, Scheme.URDC, _db(theta_db)).value
        suc = evaluate_success(scenario, Scheme.SUC, _db(theta_db), spec).value
        assert urdc >= suc


def test_capacity(scenario):
    assert outage_capacity(scenario, Scheme.URDC, 0.0) == 0.0
    with pytest.raises(ValueError):
        outage_capacity(scenario, Scheme.URDC, -1.0)
    traffic = scenario.traffic
    expected = 0.5 * traffic.duty * traffic.zeta * traffic.W * math.log2(101.0)
    assert capacity_from_success(0.5, scenario, Scheme.URDC, 100.0) == pytest.approx(expected)
    assert capacity_from_success(0.5, scenario, Scheme.SUC, 100.0) == pytest.approx(expected / traffic.duty)


def test_optimal_altitude_returns_grid_point(scenario):
    best_h, best = optimal_altitude(scenario, Scheme.URDC, 100.0, [30.0, 60.0])
    assert best_h in (30.0, 60.0)
    assert 0.0 <= best <= 1.0
    with pytest.raises(ValueError):
        optimal_altitude(scenario, Scheme.URDC, 100.0, [])
