"""YAML-backed scenario loading and validation."""

from __future__ import annotations

import copy
import enum
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, ClassVar, Dict, Mapping, Optional, Sequence

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .quadrature import QuadratureSpec

LOG = logging.getLogger(__name__)

DEFAULT_SCENARIO_NAME = "default.yaml"


class ConfigError(Exception):
    """Raised when a scenario fails validation or cannot be found."""


class Environment(str, enum.Enum):
    SUBURBAN = "suburban"
    URBAN = "urban"
    DENSE_URBAN = "dense-urban"
    HIGH_RISE_URBAN = "high-rise-urban"


class Scheme(str, enum.Enum):
    URDC = "urdc"
    SUC = "suc"


class CellShape(str, enum.Enum):
    HEXAGON = "hexagon"
    DISC = "disc"


_ENVIRONMENT_ALIASES = {"high-rise": Environment.HIGH_RISE_URBAN}


@dataclass(frozen=True)
class EnvironmentProfile:
    name: Environment
    a: float
    b: float


_PROFILES: Dict[Environment, EnvironmentProfile] = {
    Environment.SUBURBAN: EnvironmentProfile(Environment.SUBURBAN, 4.88, 0.429),
    Environment.URBAN: EnvironmentProfile(Environment.URBAN, 9.612, 0.158),
    Environment.DENSE_URBAN: EnvironmentProfile(Environment.DENSE_URBAN, 12.081, 0.114),
    Environment.HIGH_RISE_URBAN: EnvironmentProfile(Environment.HIGH_RISE_URBAN, 27.23, 0.078),
}


def parse_environment(name: str | Environment) -> Environment:
    if isinstance(name, Environment):
        return name
    key = str(name).strip().lower()
    if key in _ENVIRONMENT_ALIASES:
        return _ENVIRONMENT_ALIASES[key]
    try:
        return Environment(key)
    except ValueError:
        allowed = sorted([env.value for env in Environment] + list(_ENVIRONMENT_ALIASES))
        raise ConfigError(f"Unknown environment '{name}'. Expected one of {allowed}") from None


def environment_profile(name: str | Environment) -> EnvironmentProfile:
    """Return the LOS sigmoid parameters calibrated for an environment class."""
    return _PROFILES[parse_environment(name)]


def _dbm_to_watts(value: float) -> float:
    return 10.0 ** ((value - 30.0) / 10.0)


def _db_to_linear(value: float) -> float:
    return 10.0 ** (value / 10.0)


def _scale(factor: float) -> Callable[[float], float]:
    return lambda value: value * factor


class _Section(BaseModel):
    """Base for scenario sections; accepts unit-suffixed aliases at the boundary."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    unit_aliases: ClassVar[Dict[str, tuple[str, Callable[[float], float]]]] = {}

    @model_validator(mode="before")
    @classmethod
    def _convert_units(cls, data: Any) -> Any:
        if not isinstance(data, dict) or not cls.unit_aliases:
            return data
        converted = dict(data)
        for alias, (target, convert) in cls.unit_aliases.items():
            if alias not in converted:
                continue
            if target in converted:
                raise ValueError(f"Give either '{alias}' or '{target}', not both")
            converted[target] = convert(float(converted.pop(alias)))
        return converted


class GeometryConfig(_Section):
    R: float = 651.5
    h: float = 30.0
    lambda_d: float = 90.693e-6
    eta: float = 20.0
    sim_area: float = 20000e6
    # interferer-free radius around the serving UAV, in multiples of R
    urdc_protection: float = 0.5
    suc_protection: float = 1.0
    # hover offsets beyond this many SDs are not drawn
    offset_clip: Optional[float] = None
    cell_shape: CellShape = CellShape.HEXAGON
    disc_scale: float = 1.0

    unit_aliases = {
        "lambda_d_per_km2": ("lambda_d", _scale(1e-6)),
        "sim_area_km2": ("sim_area", _scale(1e6)),
    }

    @model_validator(mode="after")
    def _validate_geometry(self) -> "GeometryConfig":
        for name in ("R", "h", "lambda_d", "sim_area"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"geometry.{name} must be > 0")
        if not math.isfinite(self.eta) or self.eta < 0:
            raise ValueError("geometry.eta must be >= 0")
        for name in ("urdc_protection", "suc_protection"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"geometry.{name} must be >= 0")
        if self.offset_clip is not None and not self.offset_clip > 0:
            raise ValueError("geometry.offset_clip must be > 0")
        if not math.isfinite(self.disc_scale) or self.disc_scale <= 0:
            raise ValueError("geometry.disc_scale must be > 0")
        return self

    @property
    def devices_per_cell(self) -> float:
        return 1.5 * math.sqrt(3.0) * self.lambda_d * self.R**2

    @property
    def cell_area(self) -> float:
        return 1.5 * math.sqrt(3.0) * self.R**2


class ChannelConfig(_Section):
    alpha_L: float = 2.5
    alpha_N: float = 4.0
    m_L: int = 3
    m_N: int = 1
    sigma2: float = 1e-12
    P: float = 1e-3

    unit_aliases = {
        "sigma2_dbm": ("sigma2", _dbm_to_watts),
        "P_dbm": ("P", _dbm_to_watts),
    }

    @model_validator(mode="after")
    def _validate_channel(self) -> "ChannelConfig":
        if not self.alpha_L < self.alpha_N:
            raise ValueError("channel.alpha_L must be smaller than channel.alpha_N")
        if self.alpha_L <= 2:
            raise ValueError("channel.alpha_L must be > 2 for finite aggregate interference")
        if not self.m_L > self.m_N >= 1:
            raise ValueError("channel shapes must satisfy m_L > m_N >= 1")
        if not math.isfinite(self.sigma2) or self.sigma2 < 0:
            raise ValueError("channel.sigma2 must be >= 0")
        if not math.isfinite(self.P) or self.P <= 0:
            raise ValueError("channel.P must be > 0")
        return self


class AntennaConfig(_Section):
    G_dM: float = 10.0**0.5
    G_dm: float = 1.0
    G_uM: float = 10.0**0.5
    G_um: float = 1.0
    theta_d: float = math.radians(40.0)
    theta_u: float = math.radians(40.0)

    unit_aliases = {
        "G_dM_dbi": ("G_dM", _db_to_linear),
        "G_dm_dbi": ("G_dm", _db_to_linear),
        "G_uM_dbi": ("G_uM", _db_to_linear),
        "G_um_dbi": ("G_um", _db_to_linear),
        "theta_d_deg": ("theta_d", math.radians),
        "theta_u_deg": ("theta_u", math.radians),
    }

    @model_validator(mode="after")
    def _validate_antenna(self) -> "AntennaConfig":
        if not (self.G_dM >= self.G_dm > 0 and self.G_uM >= self.G_um > 0):
            raise ValueError("antenna main-lobe gains must be >= side-lobe gains > 0")
        for name in ("theta_d", "theta_u"):
            value = getattr(self, name)
            if not 0 < value <= 2 * math.pi:
                raise ValueError(f"antenna.{name} must be in (0, 2*pi]")
        return self

    @property
    def c_d(self) -> float:
        return self.theta_d / (2 * math.pi)

    @property
    def c_u(self) -> float:
        return self.theta_u / (2 * math.pi)


class TrafficTimingConfig(_Section):
    L: float = 1e6
    alpha: float = 0.005
    W: float = 125e3
    zeta: float = 0.8
    T_s: float = 12.8729
    t_DC: float = 6.4365

    unit_aliases = {
        "W_khz": ("W", _scale(1e3)),
        "W_mhz": ("W", _scale(1e6)),
        "L_mbit": ("L", _scale(1e6)),
    }

    @model_validator(mode="after")
    def _validate_traffic(self) -> "TrafficTimingConfig":
        if not 0 < self.alpha < 1:
            raise ValueError("traffic.alpha must be in (0, 1)")
        if not 0 < self.zeta <= 1:
            raise ValueError("traffic.zeta must be in (0, 1]")
        if not math.isfinite(self.T_s) or self.T_s <= 0:
            raise ValueError("traffic.T_s must be > 0")
        if not math.isfinite(self.t_DC) or self.t_DC <= 0:
            raise ValueError("traffic.t_DC must be > 0")
        return self

    @property
    def t_V(self) -> float:
        return self.T_s - self.t_DC

    @property
    def duty(self) -> float:
        return self.t_DC / self.T_s


class KinematicsConfig(_Section):
    v: float = 22.0
    a_u: float = 11.0
    a_d: float = 11.0

    @model_validator(mode="after")
    def _validate_kinematics(self) -> "KinematicsConfig":
        for name in ("v", "a_u", "a_d"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"kinematics.{name} must be > 0")
        return self

    @property
    def t_u(self) -> float:
        return self.v / self.a_u

    @property
    def t_d(self) -> float:
        return self.v / self.a_d

    @property
    def s_u(self) -> float:
        return 0.5 * self.a_u * self.t_u**2

    @property
    def s_d(self) -> float:
        return 0.5 * self.a_d * self.t_d**2


class RotorcraftParams(_Section):
    W_u: float = 100.0
    rho: float = 1.225
    R_r: float = 0.5
    A: float = 0.79
    U_tip: float = 200.0
    v0: float = 7.2
    d0: float = 0.3
    s_r: float = 0.05
    delta: float = 0.012
    Omega: float = 400.0
    k_c: float = 0.1
    P_c: float = 0.05
    battery_capacity: Optional[float] = None

    unit_aliases = {"battery_capacity_kj": ("battery_capacity", _scale(1e3))}

    @model_validator(mode="after")
    def _validate_rotorcraft(self) -> "RotorcraftParams":
        for name in ("W_u", "rho", "R_r", "A", "U_tip", "v0", "d0", "s_r", "Omega", "P_c"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"rotorcraft.{name} must be > 0")
        if self.delta < 0 or self.k_c < 0:
            raise ValueError("rotorcraft.delta and rotorcraft.k_c must be >= 0")
        if self.battery_capacity is not None and self.battery_capacity <= 0:
            raise ValueError("rotorcraft.battery_capacity must be > 0")
        return self


class SimulationConfig(_Section):
    rings: int = 15
    trials: int = 20000
    seed: int = 0
    n_geometries: int = 200
    n_fadings: int = 200
    queue_slots: int = 10_000_000
    greedy_runs: int = 50_000

    @model_validator(mode="after")
    def _validate_simulation(self) -> "SimulationConfig":
        if self.rings < 1:
            raise ValueError("simulation.rings must be >= 1")
        if self.seed < 0:
            raise ValueError("simulation.seed must be >= 0")
        for name in ("trials", "n_geometries", "n_fadings", "queue_slots", "greedy_runs"):
            if getattr(self, name) < 1:
                raise ValueError(f"simulation.{name} must be >= 1")
        return self


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    environment: Environment = Environment.SUBURBAN
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    channel: ChannelConfig = Field(default_factory=ChannelConfig)
    antenna: AntennaConfig = Field(default_factory=AntennaConfig)
    traffic: TrafficTimingConfig = Field(default_factory=TrafficTimingConfig)
    kinematics: KinematicsConfig = Field(default_factory=KinematicsConfig)
    rotorcraft: RotorcraftParams = Field(default_factory=RotorcraftParams)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    numerics: QuadratureSpec = Field(default_factory=QuadratureSpec)

    @field_validator("environment", mode="before")
    @classmethod
    def _resolve_environment(cls, value: Any) -> Any:
        if isinstance(value, str) and value.strip().lower() in _ENVIRONMENT_ALIASES:
            return _ENVIRONMENT_ALIASES[value.strip().lower()]
        return value

    @property
    def profile(self) -> EnvironmentProfile:
        return _PROFILES[self.environment]

    def updated(self, updates: Mapping[str, Any]) -> "ScenarioConfig":
        """Return a re-validated copy with dotted keys (``geometry.h``) replaced."""
        raw = self.model_dump(mode="json")
        for key, value in updates.items():
            _set_dotted(raw, key, value)
        return scenario_from_raw(raw)


@dataclass(frozen=True)
class DerivedQuantities:
    lambda_DC: float
    lambda_UC: float
    theta_DC: float
    theta_UC: float
    N: float
    N_d_queue: int


def rate_threshold(L: float, duration: float, zeta: float, W: float) -> float:
    """SINR needed to deliver ``L`` bits in ``duration`` seconds at rate zeta*W*log2(1+SINR)."""
    if L <= 0 or W <= 0 or duration <= 0 or zeta <= 0:
        raise ValueError("L, duration, zeta and W must be > 0")
    return math.expm1(math.log(2.0) * L / (duration * zeta * W))


def derive(scenario: ScenarioConfig) -> DerivedQuantities:
    geo, traffic = scenario.geometry, scenario.traffic
    if traffic.t_DC >= traffic.T_s:
        raise ConfigError("traffic.t_DC must be smaller than traffic.T_s")
    if traffic.L <= 0 or traffic.W <= 0 or geo.R <= 0:
        raise ConfigError("traffic.L, traffic.W and geometry.R must be > 0")
    lambda_uc = 2.0 / (3.0 * math.sqrt(3.0) * geo.R**2)
    n_mean = geo.devices_per_cell
    return DerivedQuantities(
        lambda_DC=lambda_uc * (traffic.t_DC / traffic.T_s),
        lambda_UC=lambda_uc,
        theta_DC=rate_threshold(traffic.L, traffic.t_DC, traffic.zeta, traffic.W),
        theta_UC=rate_threshold(traffic.L, traffic.T_s, traffic.zeta, traffic.W),
        N=n_mean,
        N_d_queue=max(1, int(round(n_mean))),
    )


class RunnerSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="UPLINK_")

    scenario_dir: Path = Path("scenarios")
    log_level: str = "INFO"


@dataclass(frozen=True)
class LoadedScenario:
    path: Optional[Path]
    data: ScenarioConfig
    raw: Dict[str, Any]


def _set_dotted(raw: Dict[str, Any], key: str, value: Any) -> None:
    parts = [part for part in key.split(".") if part]
    if not parts:
        raise ConfigError(f"Invalid override key '{key}'")
    node = raw
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"Override '{key}' descends into non-section '{part}'")
        node = child
    node[parts[-1]] = value


def apply_overrides(raw: Mapping[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply ``section.key=value`` overrides to a raw scenario document."""
    result = copy.deepcopy(dict(raw))
    for item in overrides:
        key, sep, text = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"Override '{item}' must look like section.key=value")
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"Override '{item}' has an unparsable value: {exc}") from exc
        _set_dotted(result, key.strip(), value)
    return result


def scenario_from_raw(raw: Mapping[str, Any]) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"Invalid scenario: {exc}") from exc


def _read_document(path: Path) -> Dict[str, Any]:
    with path.open("r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"Scenario {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"Scenario {path} must be a mapping at the top level")
    return raw


def load_scenario(
    path: Optional[str] = None,
    overrides: Sequence[str] = (),
    settings: Optional[RunnerSettings] = None,
) -> LoadedScenario:
    """Load, override and validate a scenario document."""
    settings = settings or RunnerSettings()
    scenario_dir = settings.scenario_dir.expanduser()
    candidates: list[Path] = []
    if path:
        candidates.append(Path(path).expanduser())
        candidates.append(scenario_dir / path)
    else:
        candidates.append(scenario_dir / DEFAULT_SCENARIO_NAME)

    for candidate in candidates:
        if not candidate.is_file():
            continue
        raw = apply_overrides(_read_document(candidate), overrides)
        LOG.debug("Loaded scenario %s", candidate)
        return LoadedScenario(path=candidate, data=scenario_from_raw(raw), raw=raw)

    if path is None:
        raw = apply_overrides({}, overrides)
        LOG.debug("No %s under %s; using built-in defaults", DEFAULT_SCENARIO_NAME, scenario_dir)
        return LoadedScenario(path=None, data=scenario_from_raw(raw), raw=raw)

    checked = ", ".join(str(candidate) for candidate in candidates)
    raise ConfigError(
        "Scenario file not found. "
        f"Checked: {checked}. "
        f"path_arg={path!r}. "
        f"UPLINK_SCENARIO_DIR={str(settings.scenario_dir)!r}"
    )
