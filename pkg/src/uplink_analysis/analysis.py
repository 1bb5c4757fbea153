"""Interference Laplace transforms, success probabilities and outage capacity."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy import special

from .channel import GainMixture, LinkState, LosModel
from .config import CellShape, ChannelConfig, ScenarioConfig, Scheme, derive
from .geometry import disc_positions, hexagon_positions
from .quadrature import QuadratureSpec, half_normal_nodes, integrate_semi_infinite

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class InterferenceField:
    intensity: float
    exclusion_radius: float
    mix: GainMixture
    los: LosModel
    channel: ChannelConfig


def interference_field(scenario: ScenarioConfig, scheme: Scheme) -> InterferenceField:
    """Poisson approximation of the co-channel transmitters seen by the serving UAV."""
    derived = derive(scenario)
    geo = scenario.geometry
    if scheme is Scheme.URDC:
        intensity, exclusion = derived.lambda_DC, geo.urdc_protection * geo.R
    else:
        intensity, exclusion = derived.lambda_UC, geo.suc_protection * geo.R
    return InterferenceField(
        intensity=intensity,
        exclusion_radius=exclusion,
        mix=GainMixture.from_antenna(scenario.antenna),
        los=LosModel(scenario.profile, scenario.geometry.h),
        channel=scenario.channel,
    )


def laplace_exponent(
    field: InterferenceField, s: float, component: LinkState, spec: QuadratureSpec
) -> tuple[float, float]:
    """Return (log L(s), absolute error estimate) for one LOS component of the field."""
    if s < 0:
        raise ValueError("s must be >= 0")
    if s == 0 or field.intensity == 0:
        return 0.0, 0.0
    ch = field.channel
    if component is LinkState.LOS:
        alpha, m, weight = ch.alpha_L, ch.m_L, field.los.at
    else:
        alpha, m, weight = ch.alpha_N, ch.m_N, field.los.nlos_at
    h2 = field.los.h**2
    half = -alpha / 2.0
    support = [(s * ch.P * gain / m, prob) for gain, prob in field.mix.support()]

    def integrand(r: float) -> float:
        path = (r * r + h2) ** half
        total = 0.0
        for scale, prob in support:
            # 1 - (1 + x)^-m
            total -= prob * math.expm1(-m * math.log1p(scale * path))
        return weight(r) * total * r

    scale = max(field.exclusion_radius, field.los.h)
    integral, error = integrate_semi_infinite(integrand, field.exclusion_radius, scale, spec)
    factor = 2.0 * math.pi * field.intensity
    return -factor * integral, factor * error


def laplace_interference(
    field: InterferenceField,
    s: float,
    component: LinkState,
    spec: Optional[QuadratureSpec] = None,
) -> float:
    exponent, _ = laplace_exponent(field, s, component, spec or QuadratureSpec())
    return math.exp(exponent)


def alzer_factor(m: int) -> float:
    """m * (m!)^(-1/m)"""
    return m * math.exp(-math.lgamma(m + 1) / m)


@dataclass(slots=True)
class SuccessEstimate:
    value: float
    est_error: float
    sd: float = 0.0


class LinkAnalyzer:
    """Evaluates the serving-link success terms of one scheme, caching transforms by argument."""

    def __init__(self, scenario: ScenarioConfig, scheme: Scheme, spec: Optional[QuadratureSpec] = None) -> None:
        self.scenario = scenario
        self.scheme = scheme
        self.spec = spec or scenario.numerics
        self.field = interference_field(scenario, scheme)
        ch = scenario.channel
        self._legs = {LinkState.LOS: (ch.alpha_L, ch.m_L), LinkState.NLOS: (ch.alpha_N, ch.m_N)}
        self._signal = ch.P * self.field.mix.main_gain
        self._cache: dict[float, tuple[float, float]] = {}

    def shape(self, state: LinkState) -> int:
        return self._legs[state][1]

    def p_los(self, r_x: float) -> float:
        return self.field.los.at(r_x)

    def _interference_exponent(self, s: float) -> tuple[float, float]:
        cached = self._cache.get(s)
        if cached is None:
            los, los_err = laplace_exponent(self.field, s, LinkState.LOS, self.spec)
            nlos, nlos_err = laplace_exponent(self.field, s, LinkState.NLOS, self.spec)
            cached = (los + nlos, los_err + nlos_err)
            self._cache[s] = cached
        return cached

    def base_argument(self, state: LinkState, r_x: float, theta: float) -> float:
        alpha, m = self._legs[state]
        h = self.scenario.geometry.h
        return alzer_factor(m) * theta * (r_x * r_x + h * h) ** (alpha / 2.0) / self._signal

    def exponential_terms(
        self, state: LinkState, r_x: float, theta: float, n_max: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """e_n = exp(-s_n sigma2) L_I(s_n) for n = 0..n_max, with absolute error bounds."""
        base = self.base_argument(state, r_x, theta)
        sigma2 = self.scenario.channel.sigma2
        values = np.ones(n_max + 1)
        errors = np.zeros(n_max + 1)
        for n in range(1, n_max + 1):
            s = n * base
            exponent, error = self._interference_exponent(s)
            values[n] = math.exp(exponent - s * sigma2)
            errors[n] = values[n] * error
        return values, errors

    def conditional(self, state: LinkState, r_x: float, theta: float) -> tuple[float, float]:
        m = self.shape(state)
        values, errors = self.exponential_terms(state, r_x, theta, m)
        n = np.arange(1, m + 1)
        coeffs = (-1.0) ** (n + 1) * special.comb(m, n)
        value = float(np.dot(coeffs, values[1:]))
        error = float(np.dot(np.abs(coeffs), errors[1:]))
        return min(max(value, 0.0), 1.0), error

    def success(self, r_x: float, theta: float) -> tuple[float, float]:
        p = self.p_los(r_x)
        los, los_err = self.conditional(LinkState.LOS, r_x, theta)
        nlos, nlos_err = self.conditional(LinkState.NLOS, r_x, theta)
        return p * los + (1.0 - p) * nlos, p * los_err + (1.0 - p) * nlos_err


def geometry_nodes(
    scenario: ScenarioConfig, scheme: Scheme, spec: Optional[QuadratureSpec] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Serving distances and normalized weights averaged over by each scheme."""
    spec = spec or scenario.numerics
    geo = scenario.geometry
    if scheme is Scheme.URDC:
        nodes, weights = half_normal_nodes(geo.eta, spec, geo.offset_clip)
    else:
        if geo.cell_shape is CellShape.DISC:
            points = disc_positions(geo.disc_scale * geo.R, spec.cell_positions)
        else:
            points = hexagon_positions(geo.R, spec.cell_positions)
        nodes = np.hypot(points[:, 0], points[:, 1])
        weights = np.ones(len(nodes))
    return nodes, weights / weights.sum()


def _check_theta(theta: float) -> None:
    if not math.isfinite(theta) or theta <= 0:
        raise ValueError("theta must be > 0")


def success_probability_urdc(
    scenario: ScenarioConfig, theta_DC: Optional[float] = None, spec: Optional[QuadratureSpec] = None
) -> SuccessEstimate:
    theta = derive(scenario).theta_DC if theta_DC is None else theta_DC
    _check_theta(theta)
    analyzer = LinkAnalyzer(scenario, Scheme.URDC, spec)
    nodes, weights = geometry_nodes(scenario, Scheme.URDC, analyzer.spec)
    value = error = 0.0
    for r_x, w in zip(nodes, weights):
        s, e = analyzer.success(float(r_x), theta)
        value += w * s
        error += w * e
    return SuccessEstimate(value=min(max(value, 0.0), 1.0), est_error=error)


def success_probability_suc(
    scenario: ScenarioConfig,
    theta_UC: Optional[float],
    r_x: float,
    spec: Optional[QuadratureSpec] = None,
) -> SuccessEstimate:
    theta = derive(scenario).theta_UC if theta_UC is None else theta_UC
    _check_theta(theta)
    if r_x < 0:
        raise ValueError("r_x must be >= 0")
    value, error = LinkAnalyzer(scenario, Scheme.SUC, spec).success(r_x, theta)
    return SuccessEstimate(value=value, est_error=error)


def success_probability_suc_cell_stats(
    scenario: ScenarioConfig,
    theta_UC: Optional[float] = None,
    spec: Optional[QuadratureSpec] = None,
    n_positions: Optional[int] = None,
) -> SuccessEstimate:
    """Mean and population SD of the SUC success probability over devices in the cell."""
    theta = derive(scenario).theta_UC if theta_UC is None else theta_UC
    _check_theta(theta)
    spec = spec or scenario.numerics
    if n_positions is not None:
        spec = spec.model_copy(update={"cell_positions": n_positions})
    if spec.cell_positions < 100:
        raise ValueError("n_positions must be >= 100")
    analyzer = LinkAnalyzer(scenario, Scheme.SUC, spec)
    nodes, _ = geometry_nodes(scenario, Scheme.SUC, spec)
    results = np.array([analyzer.success(float(r), theta) for r in nodes])
    return SuccessEstimate(
        value=float(results[:, 0].mean()),
        est_error=float(results[:, 1].mean()),
        sd=float(results[:, 0].std()),
    )


def scheme_threshold(scenario: ScenarioConfig, scheme: Scheme) -> float:
    derived = derive(scenario)
    return derived.theta_DC if scheme is Scheme.URDC else derived.theta_UC


def evaluate_success(
    scenario: ScenarioConfig,
    scheme: Scheme,
    theta: Optional[float] = None,
    spec: Optional[QuadratureSpec] = None,
) -> SuccessEstimate:
    """Scheme-averaged success probability (cell average for SUC)."""
    if scheme is Scheme.URDC:
        return success_probability_urdc(scenario, theta, spec)
    return success_probability_suc_cell_stats(scenario, theta, spec)


def capacity_from_success(success: float, scenario: ScenarioConfig, scheme: Scheme, theta: float) -> float:
    traffic = scenario.traffic
    duty = traffic.duty if scheme is Scheme.URDC else 1.0
    return success * duty * traffic.zeta * traffic.W * math.log2(1.0 + theta)


def outage_capacity(
    scenario: ScenarioConfig,
    scheme: Scheme,
    theta: float,
    spec: Optional[QuadratureSpec] = None,
) -> float:
    """Outage capacity in bits/s at SINR threshold ``theta``."""
    if theta < 0:
        raise ValueError("theta must be >= 0")
    if theta == 0:
        return 0.0
    success = evaluate_success(scenario, scheme, theta, spec).value
    return capacity_from_success(success, scenario, scheme, theta)


def optimal_altitude(
    scenario: ScenarioConfig,
    scheme: Scheme,
    theta: float,
    heights: Iterable[float],
    spec: Optional[QuadratureSpec] = None,
) -> tuple[float, float]:
    """Height on the grid that maximizes the scheme's average success probability."""
    best_h, best_value = math.nan, -1.0
    for h in heights:
        value = evaluate_success(scenario.updated({"geometry.h": float(h)}), scheme, theta, spec).value
        LOG.debug("Altitude %.1f m: success %.6f", h, value)
        if value > best_value:
            best_h, best_value = float(h), value
    if best_value < 0:
        raise ValueError("heights must not be empty")
    return best_h, best_value
