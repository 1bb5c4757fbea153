"""Experiment specifications and the sweeps behind each CLI subcommand."""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from uplink_analysis.analysis import capacity_from_success, evaluate_success
from uplink_analysis.config import ScenarioConfig, Scheme, derive
from uplink_analysis.energy import Viewpoint, energy_efficiency, propulsion_power, slot_energy
from uplink_analysis.geometry import (
    avg_segment_exact,
    avg_segment_jensen,
    avg_segment_poisson,
    greedy_segment_mean,
    timing_from_travel,
)
from uplink_analysis.meta import MetaAnalyzer
from uplink_analysis.queueing import solve_queue
from uplink_analysis.simulation import (
    SeedStreams,
    Stream,
    simulate_meta,
    simulate_queue,
    simulate_sinr,
    success_from_sinr,
)

LOG = logging.getLogger(__name__)


class ExperimentKind(str, enum.Enum):
    SUCCESS_SWEEP = "success-sweep"
    META = "meta"
    CAPACITY_SWEEP = "capacity-sweep"
    DELAY_TABLE = "delay-table"
    ENERGY_SWEEP = "energy-sweep"
    TRAJECTORY = "trajectory"
    SIMULATE = "simulate"
    VALIDATE = "validate"


SUCCESS_COLUMNS = ["scheme", "env", "h", "theta_db", "value", "est_error", "sd", "eta", "P_dbm"]
SIMULATE_COLUMNS = SUCCESS_COLUMNS + ["trials", "ci_halfwidth", "seed"]
META_COLUMNS = ["scheme", "env", "h", "theta_db", "X", "value", "est_error", "path"]
META_SIM_COLUMNS = META_COLUMNS + ["trials", "ci_halfwidth", "seed"]
CAPACITY_COLUMNS = ["scheme", "env", "h", "theta_db", "success", "capacity", "normalized"]
DELAY_COLUMNS = ["scheme", "env", "h", "packet_bits", "S_p", "stable", "Q_L", "Q_W_slots", "Q_W_seconds"]
ENERGY_COLUMNS = [
    "scheme",
    "sweep_variable",
    "sweep_value",
    "P_t",
    "E_slot",
    "EE_uav",
    "EE_device",
    "capacity",
]
TRAJECTORY_COLUMNS = [
    "R",
    "N",
    "analytic_exact",
    "analytic_jensen",
    "simulated_mean",
    "trials",
    "analytic_poisson",
]
QUEUE_SIM_COLUMNS = [
    "N_d",
    "alpha",
    "S_p",
    "Q_L",
    "Q_W_slots",
    "Q_W_analytic",
    "idle_fraction",
    "drift",
    "slots",
    "seed",
]
VALIDATE_COLUMNS = ["fixture", "criterion", "passed", "observed", "expected", "tolerance", "detail"]

DEFAULT_GRIDS: Dict[ExperimentKind, Dict[str, str]] = {
    ExperimentKind.SUCCESS_SWEEP: {"theta_db": "-20:50:5"},
    ExperimentKind.META: {"theta_db": "10", "X": "0.01:0.99:0.02"},
    ExperimentKind.CAPACITY_SWEEP: {"theta_db": "-20:60:1"},
    ExperimentKind.DELAY_TABLE: {"packets": "1e6:11e6:1e6"},
    ExperimentKind.ENERGY_SWEEP: {"value": "0:40:1"},
    ExperimentKind.TRAJECTORY: {"R": "100:1000:100", "N": "25,50,100,150"},
    ExperimentKind.SIMULATE: {"theta_db": "0:40:10", "X": "0.01:0.99:0.02"},
    ExperimentKind.VALIDATE: {},
}

SECONDARY_AXES = {"h": "geometry.h", "eta": "geometry.eta", "power": "channel.P"}
ENERGY_VARIABLES = ("speed", "bandwidth", "tdc-ratio", "power")
SIMULATE_TARGETS = ("success", "meta", "queue")


def parse_grid(text: str) -> List[float]:
    """``A:B:S`` (inclusive), a comma list, or a single value."""
    text = text.strip()
    if not text:
        raise ValueError("grid cannot be empty")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid '{text}' must look like start:stop:step")
        start, stop, step = (float(part) for part in parts)
        if not step > 0:
            raise ValueError(f"grid '{text}' needs a positive step")
        if stop < start:
            raise ValueError(f"grid '{text}' has stop < start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    return [float(item) for item in text.split(",") if item.strip()]


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: ExperimentKind
    scenario: Optional[str] = None
    overrides: List[str] = Field(default_factory=list)
    grids: Dict[str, str] = Field(default_factory=dict)
    schemes: List[Scheme] = Field(default_factory=lambda: [Scheme.URDC, Scheme.SUC])
    output: Optional[str] = None
    seed: Optional[int] = None
    trials: Optional[int] = None
    options: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("grids")
    @classmethod
    def _validate_grids(cls, value: Dict[str, str]) -> Dict[str, str]:
        for axis, text in value.items():
            try:
                points = parse_grid(text)
            except ValueError as exc:
                raise ValueError(f"grid for '{axis}': {exc}") from exc
            if not points:
                raise ValueError(f"grid for '{axis}' is empty")
        return value

    @model_validator(mode="after")
    def _validate_axes(self) -> "ExperimentSpec":
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        secondary = [axis for axis in self.grids if axis in SECONDARY_AXES]
        if len(secondary) > 1:
            raise ValueError("sweep at most one of h, eta, power alongside theta_db")
        if self.kind is ExperimentKind.ENERGY_SWEEP:
            variable = self.options.get("variable", "speed")
            if variable not in ENERGY_VARIABLES:
                raise ValueError(f"energy variable must be one of {list(ENERGY_VARIABLES)}")
        if self.kind is ExperimentKind.SIMULATE:
            target = self.options.get("target", "success")
            if target not in SIMULATE_TARGETS:
                raise ValueError(f"simulate target must be one of {list(SIMULATE_TARGETS)}")
        if self.trials is not None and self.trials < 1:
            raise ValueError("trials must be >= 1")
        return self

    def grid(self, axis: str) -> List[float]:
        text = self.grids.get(axis, DEFAULT_GRIDS[self.kind].get(axis))
        if text is None:
            raise KeyError(axis)
        return parse_grid(text)


def _map(func: Callable[[Any], Any], tasks: Sequence[Any], jobs: int) -> List[Any]:
    """Ordered map, optionally over a process pool."""
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(func, tasks))
    return [func(task) for task in tasks]


def _p_dbm(scenario: ScenarioConfig) -> float:
    return 10.0 * math.log10(scenario.channel.P) + 30.0


def _variants(spec: ExperimentSpec, scenario: ScenarioConfig) -> List[ScenarioConfig]:
    for axis, key in SECONDARY_AXES.items():
        if axis in spec.grids:
            values = spec.grid(axis)
            if axis == "power":
                return [scenario.updated({key: 10.0 ** ((v - 30.0) / 10.0)}) for v in values]
            return [scenario.updated({key: v}) for v in values]
    return [scenario]


def _success_row(task: tuple[Dict[str, Any], str, float]) -> Dict[str, Any]:
    raw, scheme_name, theta_db = task
    scenario = ScenarioConfig.model_validate(raw)
    estimate = evaluate_success(scenario, Scheme(scheme_name), db_to_linear(theta_db))
    return {
        "scheme": scheme_name,
        "env": scenario.environment.value,
        "h": scenario.geometry.h,
        "theta_db": theta_db,
        "value": estimate.value,
        "est_error": estimate.est_error,
        "sd": estimate.sd,
        "eta": scenario.geometry.eta,
        "P_dbm": _p_dbm(scenario),
    }


def _success_tasks(spec: ExperimentSpec, scenario: ScenarioConfig) -> List[tuple[Dict[str, Any], str, float]]:
    tasks = []
    for variant in _variants(spec, scenario):
        raw = variant.model_dump(mode="json")
        for scheme in spec.schemes:
            for theta_db in spec.grid("theta_db"):
                tasks.append((raw, scheme.value, theta_db))
    return tasks


def run_success_sweep(spec: ExperimentSpec, scenario: ScenarioConfig, jobs: int = 1) -> pd.DataFrame:
    rows = _map(_success_row, _success_tasks(spec, scenario), jobs)
    return pd.DataFrame(rows, columns=SUCCESS_COLUMNS)


def run_capacity_sweep(spec: ExperimentSpec, scenario: ScenarioConfig, jobs: int = 1) -> pd.DataFrame:
    rows = []
    for point in _map(_success_row, _success_tasks(spec, scenario), jobs):
        variant = scenario.updated({"geometry.h": point["h"], "geometry.eta": point["eta"]})
        theta = db_to_linear(point["theta_db"])
        capacity = capacity_from_success(point["value"], variant, Scheme(point["scheme"]), theta)
        rows.append(
            {
                "scheme": point["scheme"],
                "env": point["env"],
                "h": point["h"],
                "theta_db": point["theta_db"],
                "success": point["value"],
                "capacity": capacity,
                "normalized": capacity / variant.traffic.W,
            }
        )
    return pd.DataFrame(rows, columns=CAPACITY_COLUMNS)


def _meta_rows(task: tuple[Dict[str, Any], str, float, List[float]]) -> List[Dict[str, Any]]:
    raw, scheme_name, theta_db, grid = task
    scenario = ScenarioConfig.model_validate(raw)
    analyzer = MetaAnalyzer(scenario, db_to_linear(theta_db), Scheme(scheme_name))
    rows = []
    for X in grid:
        point = analyzer.ccdf(X)
        rows.append(
            {
                "scheme": scheme_name,
                "env": scenario.environment.value,
                "h": scenario.geometry.h,
                "theta_db": theta_db,
                "X": X,
                "value": point.value,
                "est_error": point.est_error,
                "path": point.path,
            }
        )
    return rows


def run_meta(spec: ExperimentSpec, scenario: ScenarioConfig, jobs: int = 1) -> pd.DataFrame:
    raw = scenario.model_dump(mode="json")
    grid = spec.grid("X")
    if any(not 0.0 < X < 1.0 for X in grid):
        raise ValueError("X grid must lie inside (0, 1)")
    tasks = [(raw, scheme.value, theta_db, grid) for scheme in spec.schemes for theta_db in spec.grid("theta_db")]
    rows = [row for chunk in _map(_meta_rows, tasks, jobs) for row in chunk]
    return pd.DataFrame(rows, columns=META_COLUMNS)


def _delay_row(task: tuple[Dict[str, Any], str, float]) -> Dict[str, Any]:
    raw, scheme_name, packet_bits = task
    scenario = ScenarioConfig.model_validate(raw).updated({"traffic.L": packet_bits})
    scheme = Scheme(scheme_name)
    derived = derive(scenario)
    success = evaluate_success(scenario, scheme).value
    metrics = solve_queue(derived.N_d_queue, scenario.traffic.alpha, success)
    return {
        "scheme": scheme_name,
        "env": scenario.environment.value,
        "h": scenario.geometry.h,
        "packet_bits": packet_bits,
        "S_p": success,
        "stable": metrics.stable,
        "Q_L": metrics.Q_L,
        "Q_W_slots": metrics.Q_W,
        "Q_W_seconds": metrics.Q_W * scenario.traffic.T_s,
    }


def run_delay_table(spec: ExperimentSpec, scenario: ScenarioConfig, jobs: int = 1) -> pd.DataFrame:
    raw = scenario.model_dump(mode="json")
    tasks = [(raw, scheme.value, bits) for scheme in spec.schemes for bits in spec.grid("packets")]
    return pd.DataFrame(_map(_delay_row, tasks, jobs), columns=DELAY_COLUMNS)


def energy_variant(scenario: ScenarioConfig, variable: str, value: float) -> ScenarioConfig:
    if variable == "speed":
        ratio = scenario.traffic.t_DC / scenario.traffic.t_V
        return timing_from_travel(scenario.updated({"kinematics.v": value}), ratio)
    if variable == "bandwidth":
        return scenario.updated({"traffic.W": value})
    if variable == "tdc-ratio":
        return timing_from_travel(scenario, value)
    if variable == "power":
        return scenario.updated({"channel.P": 10.0 ** ((value - 30.0) / 10.0)})
    raise ValueError(f"unknown energy sweep variable '{variable}'")


def _energy_row(task: tuple[Dict[str, Any], str, str, float, float, bool]) -> Dict[str, Any]:
    raw, scheme_name, variable, value, theta_db, surcharge = task
    scheme = Scheme(scheme_name)
    scenario = energy_variant(ScenarioConfig.model_validate(raw), variable, value)
    theta = db_to_linear(theta_db)
    success = evaluate_success(scenario, scheme, theta).value
    capacity = capacity_from_success(success, scenario, scheme, theta)
    common = (scenario.traffic, scenario.rotorcraft, scenario.channel.P, scenario.kinematics, surcharge)
    return {
        "scheme": scheme_name,
        "sweep_variable": variable,
        "sweep_value": value,
        "P_t": float(propulsion_power(scenario.rotorcraft, scenario.kinematics.v)),
        "E_slot": slot_energy(scheme, scenario.rotorcraft, scenario.traffic, scenario.kinematics, surcharge),
        "EE_uav": energy_efficiency(scheme, Viewpoint.UAV, capacity, *common),
        "EE_device": energy_efficiency(scheme, Viewpoint.DEVICE, capacity, *common),
        "capacity": capacity,
    }


def run_energy_sweep(spec: ExperimentSpec, scenario: ScenarioConfig, jobs: int = 1) -> pd.DataFrame:
    variable = spec.options.get("variable", "speed")
    theta_db = float(spec.options.get("theta_db", 20.0))
    surcharge = bool(spec.options.get("surcharge", False))
    raw = scenario.model_dump(mode="json")
    tasks = [
        (raw, scheme.value, variable, value, theta_db, surcharge)
        for scheme in spec.schemes
        for value in spec.grid("value")
    ]
    return pd.DataFrame(_map(_energy_row, tasks, jobs), columns=ENERGY_COLUMNS)


def _trajectory_row(task: tuple[int, int, float, int, float]) -> Dict[str, Any]:
    seed, index, R, runs, N = task
    rng = SeedStreams(seed).generator(Stream.TRAJECTORY, index)
    simulated, used = greedy_segment_mean(rng, N, R, runs)
    n_int = max(1, int(round(N)))
    return {
        "R": R,
        "N": N,
        "analytic_exact": avg_segment_exact(n_int, R),
        "analytic_jensen": avg_segment_jensen(n_int, R),
        "simulated_mean": simulated,
        "trials": used,
        "analytic_poisson": avg_segment_poisson(N, R),
    }


def run_trajectory(spec: ExperimentSpec, scenario: ScenarioConfig, jobs: int = 1) -> pd.DataFrame:
    runs = spec.trials or scenario.simulation.greedy_runs
    points = [(R, N) for R in spec.grid("R") for N in spec.grid("N")]
    tasks = [(scenario.simulation.seed, index, R, runs, N) for index, (R, N) in enumerate(points)]
    return pd.DataFrame(_map(_trajectory_row, tasks, jobs), columns=TRAJECTORY_COLUMNS)


def _simulate_success(spec: ExperimentSpec, scenario: ScenarioConfig) -> pd.DataFrame:
    trials = spec.trials or scenario.simulation.trials
    streams = SeedStreams(scenario.simulation.seed)
    grid = spec.grid("theta_db")
    rows = []
    for scheme in spec.schemes:
        sinr = simulate_sinr(streams, scenario, scheme, trials)
        for theta_db, estimate in zip(grid, success_from_sinr(sinr, [db_to_linear(t) for t in grid], streams.seed)):
            rows.append(
                {
                    "scheme": scheme.value,
                    "env": scenario.environment.value,
                    "h": scenario.geometry.h,
                    "theta_db": theta_db,
                    "value": estimate.value,
                    "est_error": estimate.ci_halfwidth,
                    "sd": math.sqrt(estimate.value * (1.0 - estimate.value)),
                    "eta": scenario.geometry.eta,
                    "P_dbm": _p_dbm(scenario),
                    "trials": estimate.trials,
                    "ci_halfwidth": estimate.ci_halfwidth,
                    "seed": estimate.seed,
                }
            )
    return pd.DataFrame(rows, columns=SIMULATE_COLUMNS)


def _simulate_meta(spec: ExperimentSpec, scenario: ScenarioConfig) -> pd.DataFrame:
    sim = scenario.simulation
    streams = SeedStreams(sim.seed)
    grid = spec.grid("X")
    rows = []
    for scheme in spec.schemes:
        for theta_db in spec.grid("theta_db"):
            ccdf = simulate_meta(streams, scenario, db_to_linear(theta_db), sim.n_geometries, sim.n_fadings, scheme)
            for X, value in zip(grid, ccdf(np.asarray(grid))):
                half = 1.959963984540054 * math.sqrt(value * (1.0 - value) / sim.n_geometries)
                rows.append(
                    {
                        "scheme": scheme.value,
                        "env": scenario.environment.value,
                        "h": scenario.geometry.h,
                        "theta_db": theta_db,
                        "X": X,
                        "value": float(value),
                        "est_error": half,
                        "path": "simulation",
                        "trials": sim.n_geometries,
                        "ci_halfwidth": half,
                        "seed": sim.seed,
                    }
                )
    return pd.DataFrame(rows, columns=META_SIM_COLUMNS)


def _simulate_queue(spec: ExperimentSpec, scenario: ScenarioConfig) -> pd.DataFrame:
    sim = scenario.simulation
    derived = derive(scenario)
    N_d = int(spec.options.get("N_d", derived.N_d_queue))
    alpha = float(spec.options.get("alpha", scenario.traffic.alpha))
    if "S_p" in spec.options:
        success = float(spec.options["S_p"])
    else:
        success = evaluate_success(scenario, spec.schemes[0]).value
    slots = spec.trials or sim.queue_slots
    result = simulate_queue(SeedStreams(sim.seed).generator(Stream.QUEUE), N_d, alpha, success, slots)
    analytic = solve_queue(N_d, alpha, success)
    row = {
        "N_d": N_d,
        "alpha": alpha,
        "S_p": success,
        "Q_L": result.Q_L,
        "Q_W_slots": result.Q_W,
        "Q_W_analytic": analytic.Q_W,
        "idle_fraction": result.idle_fraction,
        "drift": result.drift,
        "slots": slots,
        "seed": sim.seed,
    }
    return pd.DataFrame([row], columns=QUEUE_SIM_COLUMNS)


def run_simulate(spec: ExperimentSpec, scenario: ScenarioConfig, jobs: int = 1) -> pd.DataFrame:
    target = spec.options.get("target", "success")
    if target == "meta":
        return _simulate_meta(spec, scenario)
    if target == "queue":
        return _simulate_queue(spec, scenario)
    return _simulate_success(spec, scenario)


def run_validate(spec: ExperimentSpec, scenario: ScenarioConfig, jobs: int = 1) -> pd.DataFrame:
    from .acceptance import run_fixtures

    results = run_fixtures(scenario, quick=bool(spec.options.get("quick", False)))
    return pd.DataFrame([result.as_row() for result in results], columns=VALIDATE_COLUMNS)


RUNNERS: Dict[ExperimentKind, Callable[[ExperimentSpec, ScenarioConfig, int], pd.DataFrame]] = {
    ExperimentKind.SUCCESS_SWEEP: run_success_sweep,
    ExperimentKind.META: run_meta,
    ExperimentKind.CAPACITY_SWEEP: run_capacity_sweep,
    ExperimentKind.DELAY_TABLE: run_delay_table,
    ExperimentKind.ENERGY_SWEEP: run_energy_sweep,
    ExperimentKind.TRAJECTORY: run_trajectory,
    ExperimentKind.SIMULATE: run_simulate,
    ExperimentKind.VALIDATE: run_validate,
}


def run(spec: ExperimentSpec, scenario: ScenarioConfig, jobs: int = 1) -> pd.DataFrame:
    """Evaluate one experiment; rows come back in grid order."""
    LOG.info("Running %s", spec.kind.value)
    frame = RUNNERS[spec.kind](spec, scenario, jobs)
    LOG.info("Finished %s with %d rows", spec.kind.value, len(frame))
    return frame


def write_csv(frame: pd.DataFrame, path: Any) -> None:
    frame.to_csv(path, index=False, lineterminator="\n")
