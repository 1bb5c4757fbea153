"""Rotary-wing power, per-slot energy and energy efficiency."""

from __future__ import annotations

import enum
import logging
import math
from typing import Optional

import numpy as np
from scipy import integrate

from .config import KinematicsConfig, RotorcraftParams, Scheme, TrafficTimingConfig

LOG = logging.getLogger(__name__)


class Viewpoint(str, enum.Enum):
    UAV = "uav"
    DEVICE = "device"


def blade_and_induced_power(params: RotorcraftParams) -> tuple[float, float]:
    """Blade-profile and induced power in hover, W."""
    p0 = params.delta / 8.0 * params.rho * params.s_r * params.A * params.Omega**3 * params.R_r**3
    pi = (1.0 + params.k_c) * params.W_u**1.5 / math.sqrt(2.0 * params.rho * params.A)
    return p0, pi


def hover_power(params: RotorcraftParams) -> float:
    p0, pi = blade_and_induced_power(params)
    return p0 + pi


def propulsion_power(params: RotorcraftParams, v: float | np.ndarray) -> float | np.ndarray:
    """Forward-flight power at speed ``v`` (blade profile, induced, parasite)."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("v must be >= 0")
    p0, pi = blade_and_induced_power(params)
    ratio = v**2 / (2.0 * params.v0**2)
    blade = p0 * (1.0 + 3.0 * v**2 / params.U_tip**2)
    induced = pi * np.sqrt(np.sqrt(1.0 + ratio**2) - ratio)
    parasite = 0.5 * params.d0 * params.rho * params.s_r * params.A * v**3
    total = blade + induced + parasite
    return float(total) if total.ndim == 0 else total


def min_power_speed(params: RotorcraftParams, v_max: float = 80.0, step: float = 1.0) -> float:
    speeds = np.arange(0.0, v_max + step / 2.0, step)
    return float(speeds[int(np.argmin(propulsion_power(params, speeds)))])


def _ramp_energy(params: RotorcraftParams, peak: float, accel: float) -> float:
    value, _ = integrate.quad(lambda u: float(propulsion_power(params, u)), 0.0, peak)
    return value / accel


def segment_distance(t_V: float, kin: KinematicsConfig) -> float:
    """Segment length whose cruise-branch travel time equals ``t_V``."""
    ramp = kin.t_u + kin.t_d
    if t_V <= ramp:
        return kin.s_u + kin.s_d
    return kin.s_u + kin.s_d + (t_V - ramp) * kin.v


def acceleration_surcharge(
    params: RotorcraftParams,
    kin: KinematicsConfig,
    t_V: float,
    d_avg: Optional[float] = None,
) -> float:
    """Extra energy of the speed ramps over flying the whole segment at cruise power, J."""
    if t_V <= 0:
        return 0.0
    d = segment_distance(t_V, kin) if d_avg is None else d_avg
    p_cruise = float(propulsion_power(params, kin.v))
    if d >= kin.s_u + kin.s_d:
        ramps = _ramp_energy(params, kin.v, kin.a_u) + _ramp_energy(params, kin.v, kin.a_d)
        return ramps - p_cruise * (kin.t_u + kin.t_d)
    # triangular profile: the peak speed never reaches cruise
    peak = math.sqrt(2.0 * d * kin.a_u * kin.a_d / (kin.a_u + kin.a_d))
    ramps = _ramp_energy(params, peak, kin.a_u) + _ramp_energy(params, peak, kin.a_d)
    return ramps - p_cruise * t_V


def slot_energy(
    scheme: Scheme,
    params: RotorcraftParams,
    timing: TrafficTimingConfig,
    kin: KinematicsConfig,
    surcharge: bool = False,
    d_avg: Optional[float] = None,
) -> float:
    """UAV energy spent in one slot, J."""
    hover = hover_power(params) + params.P_c
    if scheme is Scheme.SUC:
        return hover * timing.T_s
    t_v = max(timing.t_V, 0.0)
    energy = float(propulsion_power(params, kin.v)) * t_v + hover * timing.t_DC
    if surcharge:
        extra = acceleration_surcharge(params, kin, t_v, d_avg)
        LOG.debug("Acceleration surcharge %.1f J on base %.1f J", extra, energy)
        energy += extra
    return energy


def cycle_energy(
    scheme: Scheme,
    params: RotorcraftParams,
    timing: TrafficTimingConfig,
    kin: KinematicsConfig,
    N_d: int,
    surcharge: bool = False,
) -> float:
    """Energy of one cycle that serves every device in the cell once, J."""
    if N_d < 1:
        raise ValueError("N_d must be >= 1")
    return slot_energy(scheme, params, timing, kin, surcharge) * N_d


def within_battery(energy: float, battery_capacity: Optional[float]) -> bool:
    if battery_capacity is None:
        return True
    return energy <= battery_capacity


def energy_efficiency(
    scheme: Scheme,
    viewpoint: Viewpoint,
    capacity: float,
    timing: TrafficTimingConfig,
    params: RotorcraftParams,
    P: float,
    kin: Optional[KinematicsConfig] = None,
    surcharge: bool = False,
) -> float:
    """Delivered bits per joule from the UAV or the device side."""
    if capacity < 0:
        raise ValueError("capacity must be >= 0")
    if viewpoint is Viewpoint.UAV:
        energy = slot_energy(scheme, params, timing, kin or KinematicsConfig(), surcharge)
        return capacity * timing.T_s / energy
    if scheme is Scheme.URDC:
        return capacity * timing.T_s / (P * timing.t_DC)
    return capacity / P
