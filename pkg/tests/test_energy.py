import numpy as np
import pytest

from uplink_analysis.config import KinematicsConfig, RotorcraftParams, Scheme, TrafficTimingConfig
from uplink_analysis.energy import (
    Viewpoint,
    acceleration_surcharge,
    blade_and_induced_power,
    cycle_energy,
    energy_efficiency,
    hover_power,
    min_power_speed,
    propulsion_power,
    slot_energy,
    within_battery,
)

PARAMS = RotorcraftParams()
KIN = KinematicsConfig()
TIMING = TrafficTimingConfig()


def test_hover_power_components():
    blade, induced = blade_and_induced_power(PARAMS)
    assert blade == pytest.approx(580.65, rel=1e-4)
    assert induced == pytest.approx(790.67, rel=1e-4)
    assert hover_power(PARAMS) == pytest.approx(1371.3, rel=0.005)


def test_propulsion_power_reference_points():
    assert propulsion_power(PARAMS, 0.0) == pytest.approx(hover_power(PARAMS))
    assert propulsion_power(PARAMS, 22.0) == pytest.approx(936.3, rel=0.005)
    speeds = np.array([0.0, 10.0, 22.0])
    assert propulsion_power(PARAMS, speeds).shape == (3,)
    with pytest.raises(ValueError):
        propulsion_power(PARAMS, -1.0)


def test_minimum_power_speed():
    assert min_power_speed(PARAMS) == pytest.approx(22.0, abs=1.0)


def test_slot_energy_reference_values():
    assert slot_energy(Scheme.SUC, PARAMS, TIMING, KIN) == pytest.approx(17649.0, rel=0.001)
    assert slot_energy(Scheme.URDC, PARAMS, TIMING, KIN) == pytest.approx(14850.0, rel=0.001)


def test_acceleration_surcharge():
    base = slot_energy(Scheme.URDC, PARAMS, TIMING, KIN)
    with_ramps = slot_energy(Scheme.URDC, PARAMS, TIMING, KIN, surcharge=True)
    assert with_ramps > base
    assert with_ramps == pytest.approx(15568.0, rel=0.10)
    # past the knot the ramp cost no longer depends on the segment length
    long_a = acceleration_surcharge(PARAMS, KIN, TIMING.t_V, d_avg=100.0)
    long_b = acceleration_surcharge(PARAMS, KIN, TIMING.t_V, d_avg=200.0)
    assert long_a == pytest.approx(long_b)
    assert acceleration_surcharge(PARAMS, KIN, 0.0) == 0.0


def test_short_hop_uses_triangular_profile():
    short = acceleration_surcharge(PARAMS, KIN, 1.0, d_avg=10.0)
    assert np.isfinite(short)


def test_cycle_energy_and_battery():
    slot = slot_energy(Scheme.SUC, PARAMS, TIMING, KIN)
    assert cycle_energy(Scheme.SUC, PARAMS, TIMING, KIN, 100) == pytest.approx(100 * slot)
    with pytest.raises(ValueError):
        cycle_energy(Scheme.SUC, PARAMS, TIMING, KIN, 0)
    assert within_battery(1e6, None)
    assert within_battery(1e6, 2e6)
    assert not within_battery(3e6, 2e6)


def test_energy_efficiency_views():
    capacity = 1e5
    uav = energy_efficiency(Scheme.URDC, Viewpoint.UAV, capacity, TIMING, PARAMS, 1e-3, KIN)
    assert uav == pytest.approx(capacity * TIMING.T_s / slot_energy(Scheme.URDC, PARAMS, TIMING, KIN))
    device_urdc = energy_efficiency(Scheme.URDC, Viewpoint.DEVICE, capacity, TIMING, PARAMS, 1e-3)
    assert device_urdc == pytest.approx(capacity * TIMING.T_s / (1e-3 * TIMING.t_DC))
    device_suc = energy_efficiency(Scheme.SUC, Viewpoint.DEVICE, capacity, TIMING, PARAMS, 1e-3)
    assert device_suc == pytest.approx(capacity / 1e-3)
    with pytest.raises(ValueError):
        energy_efficiency(Scheme.SUC, Viewpoint.DEVICE, -1.0, TIMING, PARAMS, 1e-3)


def test_uav_efficiency_is_linear_in_capacity():
    values = [
        energy_efficiency(Scheme.SUC, Viewpoint.UAV, c, TIMING, PARAMS, 1e-3) for c in (1e5, 2e5, 3e5)
    ]
    assert values[2] - values[1] == pytest.approx(values[1] - values[0], rel=1e-12)
