"""Acceptance fixtures behind ``uplinkctl validate``.

Each fixture returns one row per checked criterion so the CLI can print a pass/fail
table. Quick mode shrinks trial, slot and grid counts; tolerances stay the same.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List

import numpy as np

from uplink_analysis.analysis import (
    LinkAnalyzer,
    alzer_factor,
    capacity_from_success,
    evaluate_success,
    interference_field,
    laplace_interference,
    success_probability_urdc,
)
from uplink_analysis.channel import LinkState
from uplink_analysis.config import Environment, ScenarioConfig, Scheme, derive
from uplink_analysis.energy import (
    Viewpoint,
    energy_efficiency,
    hover_power,
    min_power_speed,
    propulsion_power,
    slot_energy,
)
from uplink_analysis.errors import NumericalError
from uplink_analysis.geometry import avg_segment_exact, avg_segment_jensen, greedy_segment_mean, travel_time
from uplink_analysis.meta import MetaAnalyzer
from uplink_analysis.queueing import build_ph_service, build_qbd_blocks, is_stable, rate_matrix, solve_queue
from uplink_analysis.simulation import SeedStreams, Stream, simulate_meta, simulate_queue, simulate_sinr, success_from_sinr

LOG = logging.getLogger(__name__)


@dataclass(slots=True)
class FixtureResult:
    fixture: str
    criterion: str
    observed: float
    expected: float
    tolerance: float
    passed: bool
    detail: str = ""

    def as_row(self) -> Dict[str, Any]:
        return {
            "fixture": self.fixture,
            "criterion": self.criterion,
            "passed": self.passed,
            "observed": self.observed,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


def _near(fixture: str, criterion: str, observed: float, expected: float, tol: float, detail: str = "") -> FixtureResult:
    passed = math.isfinite(observed) and abs(observed - expected) <= tol
    return FixtureResult(fixture, criterion, float(observed), float(expected), float(tol), passed, detail)


def _rel(fixture: str, criterion: str, observed: float, expected: float, rel: float) -> FixtureResult:
    return _near(fixture, criterion, observed, expected, abs(expected) * rel, f"relative {rel:g}")


def _flag(fixture: str, criterion: str, ok: bool, detail: str = "") -> FixtureResult:
    return FixtureResult(fixture, criterion, float(ok), 1.0, 0.0, bool(ok), detail)


def trajectory_fixture(scenario: ScenarioConfig, quick: bool) -> List[FixtureResult]:
    name = "trajectory"
    runs = 5_000 if quick else 50_000
    rng = SeedStreams(scenario.simulation.seed).generator(Stream.TRAJECTORY)
    simulated, used = greedy_segment_mean(rng, 25.0, 100.0, runs)
    return [
        _near(name, "avg_segment N=25 R=100", avg_segment_exact(25, 100.0), 27.851, 5e-3),
        _near(name, "avg_segment N=150 R=100", avg_segment_exact(150, 100.0), 12.398, 5e-3),
        _near(name, "avg_segment N=25 R=200", avg_segment_exact(25, 200.0), 55.701, 5e-3),
        _rel(name, f"greedy mean N=25 R=100 ({used} runs)", simulated, 28.20, 0.02),
    ]


def energy_fixture(scenario: ScenarioConfig, quick: bool) -> List[FixtureResult]:
    name = "energy"
    params, kin = scenario.rotorcraft, scenario.kinematics
    t_v = travel_time(avg_segment_jensen(100, scenario.geometry.R), kin)
    timing = scenario.traffic
    base = slot_energy(Scheme.URDC, params, timing, kin)
    return [
        _rel(name, "hover power", hover_power(params), 1371.3, 0.005),
        _rel(name, "propulsion power at 22 m/s", float(propulsion_power(params, 22.0)), 936.3, 0.005),
        _near(name, "minimum-power speed", min_power_speed(params), 22.0, 1.0),
        _rel(name, "travel time", t_v, 6.4365, 0.005),
        _rel(name, "SUC slot energy", slot_energy(Scheme.SUC, params, timing, kin), 17649.0, 0.001),
        _rel(name, "URDC base slot energy", base, 14850.0, 0.001),
        _rel(name, "URDC slot energy with ramps", slot_energy(Scheme.URDC, params, timing, kin, True), 15568.0, 0.10),
    ]


def cross_validation_fixture(scenario: ScenarioConfig, quick: bool) -> List[FixtureResult]:
    name = "cross-validation"
    environments = [Environment.SUBURBAN] if quick else list(Environment)
    thetas_db = [0.0, 20.0, 40.0] if quick else [0.0, 10.0, 20.0, 30.0, 40.0]
    trials = max(20_000, scenario.simulation.trials)
    results = []
    for env in environments:
        variant = scenario.updated({"environment": env.value})
        if quick:
            variant = variant.updated({"numerics.cell_positions": 100})
        streams = SeedStreams(variant.simulation.seed)
        for scheme in (Scheme.URDC, Scheme.SUC):
            thetas = [10.0 ** (t / 10.0) for t in thetas_db]
            simulated = success_from_sinr(simulate_sinr(streams, variant, scheme, trials), thetas, streams.seed)
            for theta_db, theta, sim in zip(thetas_db, thetas, simulated):
                analytic = evaluate_success(variant, scheme, theta).value
                results.append(
                    _near(
                        name,
                        f"{env.value} {scheme.value} {theta_db:g} dB",
                        sim.value,
                        analytic,
                        max(sim.ci_halfwidth, 0.015),
                        f"{trials} trials",
                    )
                )
    return results


# Model settings behind the reference curves: interferers kept beyond a full
# cell radius, hover offsets clipped at two SDs and the SUC mean taken over a
# disc slightly inside the circumscribed circle. Scenario defaults are unchanged.
REFERENCE_CURVE_MODEL: Dict[str, Any] = {
    "geometry.urdc_protection": 1.0,
    "geometry.offset_clip": 2.0,
    "geometry.cell_shape": "disc",
    "geometry.disc_scale": 0.97,
}


def reference_points_fixture(scenario: ScenarioConfig, quick: bool) -> List[FixtureResult]:
    name = "reference-points"
    base = scenario.updated(
        {"environment": "suburban", "geometry.h": 30.0, "geometry.eta": 20.0, **REFERENCE_CURVE_MODEL}
    )
    return [
        _near(name, "URDC 40 dB", evaluate_success(base, Scheme.URDC, 1e4).value, 0.9784, 0.005),
        _near(name, "URDC 50 dB", evaluate_success(base, Scheme.URDC, 1e5).value, 0.7202, 0.01),
        _near(name, "SUC h=30 0 dB cell mean", evaluate_success(base, Scheme.SUC, 1.0).value, 0.2202, 0.01),
        _near(
            name,
            "SUC h=100 20 dB cell mean",
            evaluate_success(base.updated({"geometry.h": 100.0}), Scheme.SUC, 100.0).value,
            0.3056,
            0.015,
        ),
    ]


def meta_fixture(scenario: ScenarioConfig, quick: bool) -> List[FixtureResult]:
    name = "meta"
    base = scenario.updated({"environment": "suburban", "geometry.h": 30.0})
    thetas_db = [10.0, 30.0, 45.0] if quick else [float(t) for t in range(0, 50, 5)]
    worst = 0.0
    for theta_db in thetas_db:
        theta = 10.0 ** (theta_db / 10.0)
        m1 = MetaAnalyzer(base, theta).moment(1)
        worst = max(worst, abs(m1 - success_probability_urdc(base, theta).value))
    results = [
        _near(name, "M_0", MetaAnalyzer(base, 10.0).moment(0), 1.0, 0.0),
        _near(name, f"max |M_1 - S_p| over {len(thetas_db)} thresholds", worst, 0.0, 1e-6),
    ]

    analyzer = MetaAnalyzer(base, 10.0)
    grid = (np.arange(100) + 0.5) / 100.0
    values = []
    try:
        values = [analyzer.ccdf(float(X)).value for X in grid]
    except NumericalError as exc:
        results.append(_flag(name, "CCDF evaluation", False, str(exc)))
        return results
    results.append(_flag(name, "CCDF nonincreasing in X", bool(np.all(np.diff(values) <= 1e-9))))
    m1 = analyzer.moment(1)
    results.append(_rel(name, "integral of CCDF equals M_1", float(np.mean(values)), m1, 0.02))
    results.append(_flag(name, "CCDF at 0.99 is at least 0.99", analyzer.ccdf(0.99).value >= 0.99))

    sim = base.simulation
    n_geometries = 60 if quick else sim.n_geometries
    n_fadings = 100 if quick else sim.n_fadings
    empirical = simulate_meta(SeedStreams(sim.seed), base, 10.0, n_geometries, n_fadings)
    for X in (0.9, 0.95, 0.99):
        results.append(
            _near(name, f"simulated CCDF at X={X}", float(empirical(X)), analyzer.ccdf(X).value, 0.03)
        )
    results.append(_near(name, "simulated mean conditional success", empirical.mean, m1, 0.01))
    return results


DES_TRIPLES = ((3, 0.05, 0.9), (10, 0.02, 0.8), (5, 0.1, 0.95))


def queueing_fixture(scenario: ScenarioConfig, quick: bool) -> List[FixtureResult]:
    name = "queueing"
    results = []
    blocks = build_qbd_blocks(build_ph_service(10, 0.8), 0.02)
    R = rate_matrix(blocks)
    residual = float(np.max(np.abs(R - (blocks.A0 + R @ blocks.A1 + R @ R @ blocks.A2))))
    results.append(_near(name, "rate matrix residual", residual, 0.0, 1e-10))

    slots = 1_000_000 if quick else 10_000_000
    streams = SeedStreams(scenario.simulation.seed)
    for index, (N_d, alpha, S_p) in enumerate(DES_TRIPLES):
        analytic = solve_queue(N_d, alpha, S_p).Q_W
        simulated = simulate_queue(streams.generator(Stream.QUEUE, index), N_d, alpha, S_p, slots).Q_W
        results.append(_rel(name, f"DES delay N_d={N_d} alpha={alpha} S_p={S_p}", simulated, analytic, 0.02))

    at = solve_queue(4, 0.125, 0.5)
    results.append(_flag(name, "stability boundary", is_stable(0.125 - 1e-9, 4, 0.5) and not at.stable))

    base = scenario.updated({"environment": "suburban", "traffic.L": 1e6})
    success = evaluate_success(base, Scheme.URDC).value
    delay = solve_queue(100, base.traffic.alpha, success).Q_W
    results.append(_near(name, "URDC 1 Mbit delay (slots)", delay, 149.5, 1.0, f"S_p={success:.6f}"))
    return results


def efficiency_fixture(scenario: ScenarioConfig, quick: bool) -> List[FixtureResult]:
    name = "efficiency"
    base = scenario.updated({"environment": "suburban", "geometry.h": 30.0, "traffic.W": 1e6})
    theta = 100.0
    results = []
    expected = {Scheme.URDC: 2202.25, Scheme.SUC: 670.5}
    reference = base.updated(REFERENCE_CURVE_MODEL)
    for scheme in (Scheme.URDC, Scheme.SUC):
        success = evaluate_success(reference, scheme, theta).value
        capacity = capacity_from_success(success, reference, scheme, theta)
        ee = energy_efficiency(
            scheme, Viewpoint.UAV, capacity, base.traffic, base.rotorcraft, base.channel.P, base.kinematics, True
        )
        results.append(_rel(name, f"{scheme.value} UAV-view EE at 1 MHz", ee, expected[scheme], 0.05))

    success = evaluate_success(base, Scheme.URDC, theta).value
    widths = np.array([0.5e6, 1e6, 1.5e6, 2e6])
    ees = []
    for W in widths:
        variant = base.updated({"traffic.W": float(W)})
        capacity = capacity_from_success(success, variant, Scheme.URDC, theta)
        ees.append(
            energy_efficiency(Scheme.URDC, Viewpoint.UAV, capacity, variant.traffic, variant.rotorcraft, variant.channel.P)
        )
    slope, intercept = np.polyfit(widths, ees, 1)
    linear = slope * widths + intercept
    results.append(_near(name, "EE linear in W", float(np.max(np.abs(linear - ees)) / max(ees)), 0.0, 1e-9))

    powers_dbm = (20.0, 30.0)
    device = []
    for p_dbm in powers_dbm:
        variant = base.updated({"channel.P": 10.0 ** ((p_dbm - 30.0) / 10.0)})
        s = evaluate_success(variant, Scheme.URDC, theta).value
        capacity = capacity_from_success(s, variant, Scheme.URDC, theta)
        device.append(
            energy_efficiency(
                Scheme.URDC, Viewpoint.DEVICE, capacity, variant.traffic, variant.rotorcraft, variant.channel.P
            )
        )
    tail = (math.log10(device[1]) - math.log10(device[0])) / ((powers_dbm[1] - powers_dbm[0]) / 10.0)
    results.append(_near(name, "device-view EE tail slope", tail, -1.0, 0.02))
    return results


def property_fixture(scenario: ScenarioConfig, quick: bool) -> List[FixtureResult]:
    name = "properties"
    results = []
    field = interference_field(scenario, Scheme.URDC)
    grid = [0.0] + [10.0**k for k in range(4, 11)]
    values = [
        laplace_interference(field, s, LinkState.LOS, scenario.numerics)
        * laplace_interference(field, s, LinkState.NLOS, scenario.numerics)
        for s in grid
    ]
    results.append(_near(name, "Laplace transform at s=0", values[0], 1.0, 0.0))
    results.append(_flag(name, "Laplace transform in (0, 1]", all(0.0 < v <= 1.0 for v in values)))
    results.append(_flag(name, "Laplace transform nonincreasing", bool(np.all(np.diff(values) <= 0.0))))

    thetas_db = [-10.0, 10.0, 30.0, 50.0] if quick else [float(t) for t in range(-20, 60, 10)]
    success = [success_probability_urdc(scenario, 10.0 ** (t / 10.0)).value for t in thetas_db]
    results.append(_flag(name, "success nonincreasing in threshold", bool(np.all(np.diff(success) <= 1e-12))))

    link = LinkAnalyzer(scenario.updated({"channel.m_N": 1}), Scheme.URDC)
    direct, _ = link.exponential_terms(LinkState.NLOS, 10.0, 10.0, 1)
    collapsed, _ = link.conditional(LinkState.NLOS, 10.0, 10.0)
    results.append(_flag(name, "Alzer factor is 1 at m=1", alzer_factor(1) == 1.0))
    results.append(_near(name, "Rayleigh conditional collapses to one term", collapsed, float(direct[1]), 0.0))

    loud = success_probability_urdc(scenario.updated({"channel.P": 1e6}), 100.0).value
    noiseless = success_probability_urdc(scenario.updated({"channel.sigma2": 0.0}), 100.0).value
    results.append(_near(name, "interference-limited saturation", loud, noiseless, 1e-6))

    streams = SeedStreams(scenario.simulation.seed)
    first = simulate_sinr(streams, scenario, Scheme.URDC, 512)
    second = simulate_sinr(streams, scenario, Scheme.URDC, 512)
    results.append(_flag(name, "simulation reproducible under a fixed seed", first.tobytes() == second.tobytes()))
    return results


FIXTURES: Dict[str, Callable[[ScenarioConfig, bool], List[FixtureResult]]] = {
    "trajectory": trajectory_fixture,
    "energy": energy_fixture,
    "cross-validation": cross_validation_fixture,
    "reference-points": reference_points_fixture,
    "meta": meta_fixture,
    "queueing": queueing_fixture,
    "efficiency": efficiency_fixture,
    "properties": property_fixture,
}


def run_fixtures(scenario: ScenarioConfig, quick: bool = False, names: List[str] | None = None) -> List[FixtureResult]:
    """Run the named fixtures (all by default); a fixture that raises becomes one failed row."""
    results: List[FixtureResult] = []
    derive(scenario)
    for name in names or list(FIXTURES):
        LOG.info("Running fixture %s%s", name, " (quick)" if quick else "")
        try:
            results.extend(FIXTURES[name](scenario, quick))
        except (NumericalError, ValueError) as exc:
            LOG.warning("Fixture %s raised %s", name, exc)
            results.append(_flag(name, "fixture completed", False, str(exc)))
    failed = sum(not result.passed for result in results)
    LOG.info("Fixtures done: %d checks, %d failed", len(results), failed)
    return results
