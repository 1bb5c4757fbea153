"""Command line front end for the uplink analysis experiments."""

from __future__ import annotations

import argparse
import importlib.metadata
import json
import logging
import re
import sys
import time
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from pydantic import ValidationError

from uplink_analysis import __version__
from uplink_analysis.config import ConfigError, RunnerSettings, ScenarioConfig, Scheme, load_scenario
from uplink_analysis.errors import NumericalError

from .experiments import (
    ENERGY_VARIABLES,
    SIMULATE_TARGETS,
    ExperimentKind,
    ExperimentSpec,
    parse_grid,
    run,
    write_csv,
)
from .manifest import ManifestError, RunManifest, csv_for, diff_runs, manifest_path_for, read_manifest, write_manifest

LOG = logging.getLogger(__name__)

EXIT_SUCCESS = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"

# flags whose values may legitimately start with "-"
GRID_FLAGS = frozenset(
    {"--theta-db", "--x-grid", "--values", "--packets", "--heights", "--etas", "--powers", "--radii", "--devices"}
)
_NEGATIVE = re.compile(r"^-(\d|\.\d)")


class CLIError(Exception):
    """Custom exception to control the exit code from the CLI."""

    def __init__(self, message: str, exit_code: int = EXIT_USAGE) -> None:
        super().__init__(message)
        self.exit_code = exit_code


def _join_negative_values(argv: List[str]) -> List[str]:
    """Turn ``--theta-db -20:65:1`` into ``--theta-db=-20:65:1`` so argparse keeps the value."""
    joined: List[str] = []
    index = 0
    while index < len(argv):
        token = argv[index]
        if token in GRID_FLAGS and index + 1 < len(argv) and _NEGATIVE.match(argv[index + 1]):
            joined.append(f"{token}={argv[index + 1]}")
            index += 2
            continue
        joined.append(token)
        index += 1
    return joined


def _common_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="Scenario YAML (falls back to UPLINK_SCENARIO_DIR/default.yaml).")
    parent.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Dotted scenario override such as geometry.h=100 (repeatable).",
    )
    parent.add_argument("--out", help="CSV output path; the manifest is written next to it.")
    parent.add_argument("--seed", type=_parse_non_negative_int, help="Seed for every random stream.")
    parent.add_argument("--trials", type=_parse_positive_int, help="Trials, runs or slots for sampled results.")
    parent.add_argument(
        "--scheme",
        choices=[scheme.value for scheme in Scheme] + ["both"],
        default="both",
        help="Uplink scheme to evaluate (default: both).",
    )
    parent.add_argument(
        "--env",
        choices=["suburban", "urban", "dense-urban", "high-rise", "high-rise-urban"],
        help="Propagation environment.",
    )
    parent.add_argument("--jobs", type=_parse_positive_int, default=1, help="Worker processes for sweeps.")
    parent.add_argument("--log-level", help="Logging level (falls back to UPLINK_LOG_LEVEL).")
    parent.add_argument("--quiet", action="store_true", help="Only log warnings and errors.")
    parent.add_argument("--pretty", action="store_true", help="Indent the JSON summary.")
    return parent


def parse_args(argv: Iterable[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="uplinkctl", description="UAV uplink analysis experiments.")
    parser.add_argument(
        "--version",
        action="version",
        version=_resolve_version(),
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    parent = _common_parent()
    _build_success_parser(subparsers, parent)
    _build_meta_parser(subparsers, parent)
    _build_capacity_parser(subparsers, parent)
    _build_delay_parser(subparsers, parent)
    _build_energy_parser(subparsers, parent)
    _build_trajectory_parser(subparsers, parent)
    _build_simulate_parser(subparsers, parent)
    _build_validate_parser(subparsers, parent)
    _build_diff_parser(subparsers)
    _build_replay_parser(subparsers)
    raw = list(sys.argv[1:] if argv is None else argv)
    return parser.parse_args(_join_negative_values(raw))


def _build_success_parser(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:  # type: ignore[arg-type]
    parser = subparsers.add_parser("success-sweep", parents=[parent], help="Analytic success probability sweep.")
    parser.add_argument("--theta-db", type=_parse_grid, help="Threshold grid A:B:S in dB.")
    axis = parser.add_mutually_exclusive_group()
    axis.add_argument("--heights", type=_parse_grid, help="Altitude grid in m.")
    axis.add_argument("--etas", type=_parse_grid, help="Hover offset SD grid in m.")
    axis.add_argument("--powers", type=_parse_grid, help="Device transmit power grid in dBm.")
    parser.set_defaults(command="success-sweep")


def _build_meta_parser(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:  # type: ignore[arg-type]
    parser = subparsers.add_parser("meta", parents=[parent], help="Meta-distribution of the link reliability.")
    parser.add_argument("--theta-db", type=_parse_grid, help="Threshold grid in dB (default 10).")
    parser.add_argument("--x-grid", type=_parse_grid, help="Reliability levels inside (0, 1).")
    parser.set_defaults(command="meta")


def _build_capacity_parser(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:  # type: ignore[arg-type]
    parser = subparsers.add_parser("capacity-sweep", parents=[parent], help="Outage capacity over thresholds.")
    parser.add_argument("--theta-db", type=_parse_grid, help="Threshold grid A:B:S in dB.")
    parser.add_argument("--heights", type=_parse_grid, help="Altitude grid in m.")
    parser.set_defaults(command="capacity-sweep")


def _build_delay_parser(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:  # type: ignore[arg-type]
    parser = subparsers.add_parser("delay-table", parents=[parent], help="Mean queueing delay per packet size.")
    parser.add_argument("--packets", type=_parse_grid, help="Packet size grid in bits.")
    parser.set_defaults(command="delay-table")


def _build_energy_parser(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:  # type: ignore[arg-type]
    parser = subparsers.add_parser("energy-sweep", parents=[parent], help="Propulsion energy and efficiency.")
    parser.add_argument("--variable", choices=ENERGY_VARIABLES, default="speed", help="Swept quantity.")
    parser.add_argument("--values", type=_parse_grid, help="Grid of the swept quantity (SI, dBm for power).")
    parser.add_argument("--theta-db", type=float, default=20.0, help="Fixed threshold in dB (default 20).")
    parser.add_argument("--surcharge", action="store_true", help="Add the acceleration ramps to URDC slots.")
    parser.set_defaults(command="energy-sweep")


def _build_trajectory_parser(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:  # type: ignore[arg-type]
    parser = subparsers.add_parser("trajectory", parents=[parent], help="Greedy tour segment lengths.")
    parser.add_argument("--radii", type=_parse_grid, help="Cell radius grid in m.")
    parser.add_argument("--devices", type=_parse_grid, help="Mean devices per cell.")
    parser.set_defaults(command="trajectory")


def _build_simulate_parser(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:  # type: ignore[arg-type]
    parser = subparsers.add_parser("simulate", parents=[parent], help="Monte Carlo and discrete-event runs.")
    parser.add_argument("--target", choices=SIMULATE_TARGETS, default="success", help="Quantity to simulate.")
    parser.add_argument("--theta-db", type=_parse_grid, help="Threshold grid in dB.")
    parser.add_argument("--x-grid", type=_parse_grid, help="Reliability levels for --target meta.")
    parser.add_argument("--success", type=_parse_probability, help="Per-attempt success for --target queue.")
    parser.set_defaults(command="simulate")


def _build_validate_parser(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:  # type: ignore[arg-type]
    parser = subparsers.add_parser("validate", parents=[parent], help="Run the acceptance fixtures.")
    parser.add_argument("--quick", action="store_true", help="Reduced trial and slot counts.")
    parser.set_defaults(command="validate")


def _build_diff_parser(subparsers: argparse._SubParsersAction) -> None:  # type: ignore[arg-type]
    parser = subparsers.add_parser("diff", help="Compare two runs by their manifests.")
    parser.add_argument("left", help="First manifest.")
    parser.add_argument("right", help="Second manifest.")
    parser.add_argument("--tolerance", type=_parse_non_negative_float, default=1e-9, help="Relative tolerance.")
    parser.add_argument("--pretty", action="store_true", help="Indent the JSON report.")
    parser.add_argument("--log-level", help="Logging level.")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors.")
    parser.set_defaults(command="diff")


def _build_replay_parser(subparsers: argparse._SubParsersAction) -> None:  # type: ignore[arg-type]
    parser = subparsers.add_parser("replay", help="Re-run a manifest with its stored scenario.")
    parser.add_argument("manifest", help="Manifest written by an earlier run.")
    parser.add_argument("--out", help="CSV output path (default: <csv>.replay.csv).")
    parser.add_argument("--jobs", type=_parse_positive_int, default=1, help="Worker processes for sweeps.")
    parser.add_argument("--pretty", action="store_true", help="Indent the JSON summary.")
    parser.add_argument("--log-level", help="Logging level.")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors.")
    parser.set_defaults(command="replay")


def _parse_grid(value: str) -> str:
    try:
        points = parse_grid(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not points:
        raise argparse.ArgumentTypeError("grid must not be empty")
    return value


def _parse_positive_int(value: str) -> int:
    try:
        parsed = int(float(value))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("must be an integer") from exc
    if parsed < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return parsed


def _parse_non_negative_int(value: str) -> int:
    try:
        parsed = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("must be an integer") from exc
    if parsed < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return parsed


def _parse_non_negative_float(value: str) -> float:
    try:
        parsed = float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("must be a number") from exc
    if parsed < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return parsed


def _parse_probability(value: str) -> float:
    parsed = _parse_non_negative_float(value)
    if not 0.0 < parsed <= 1.0:
        raise argparse.ArgumentTypeError("must be in (0, 1]")
    return parsed


def _resolve_version() -> str:
    try:
        return importlib.metadata.version("uav-uplink-analysis")
    except importlib.metadata.PackageNotFoundError:
        return __version__


def _log(message: str, *, quiet: bool) -> None:
    if not quiet:
        print(message, file=sys.stderr)


def _print_json(value: object, pretty: bool) -> None:
    indent = 2 if pretty else None
    print(json.dumps(value, indent=indent, sort_keys=pretty, default=str))


def _diagnose(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def _configure_logging(args: argparse.Namespace, settings: RunnerSettings) -> None:
    level_name = "WARNING" if args.quiet else (args.log_level or settings.log_level)
    level = logging.getLevelName(str(level_name).upper())
    if not isinstance(level, int):
        raise CLIError(f"Unknown log level '{level_name}'")
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def _schemes(value: str) -> List[Scheme]:
    return [Scheme.URDC, Scheme.SUC] if value == "both" else [Scheme(value)]


def build_spec(args: argparse.Namespace) -> ExperimentSpec:
    """Translate parsed arguments into a validated experiment spec."""
    kind = ExperimentKind(args.command)
    grids: Dict[str, str] = {}
    options: Dict[str, Any] = {}
    for flag, axis in (
        ("theta_db", "theta_db"),
        ("x_grid", "X"),
        ("heights", "h"),
        ("etas", "eta"),
        ("powers", "power"),
        ("packets", "packets"),
        ("values", "value"),
        ("radii", "R"),
        ("devices", "N"),
    ):
        value = getattr(args, flag, None)
        if isinstance(value, str):
            grids[axis] = value
    if kind is ExperimentKind.ENERGY_SWEEP:
        options.update(variable=args.variable, theta_db=args.theta_db, surcharge=args.surcharge)
    if kind is ExperimentKind.SIMULATE:
        options["target"] = args.target
        if args.success is not None:
            options["S_p"] = args.success
    if kind is ExperimentKind.VALIDATE:
        options["quick"] = args.quick
    try:
        return ExperimentSpec(
            kind=kind,
            scenario=args.config,
            overrides=list(args.override),
            grids=grids,
            schemes=_schemes(args.scheme),
            output=args.out,
            seed=args.seed,
            trials=args.trials,
            options=options,
        )
    except ValidationError as exc:
        raise CLIError(f"Invalid experiment: {exc}") from exc


def resolve_scenario(spec: ExperimentSpec, env: Optional[str], settings: RunnerSettings) -> tuple[ScenarioConfig, Optional[Path]]:
    overrides = list(spec.overrides)
    if env:
        overrides.append(f"environment={env}")
    if spec.seed is not None:
        overrides.append(f"simulation.seed={spec.seed}")
    loaded = load_scenario(spec.scenario, overrides, settings)
    return loaded.data, loaded.path


def _output_path(spec: ExperimentSpec) -> Path:
    path = Path(spec.output or f"{spec.kind.value}.csv").expanduser()
    if not path.parent.is_dir():
        raise CLIError(f"Output directory {path.parent} does not exist", EXIT_IO)
    return path


def _write_run(
    spec: ExperimentSpec,
    scenario: ScenarioConfig,
    scenario_path: Optional[Path],
    csv_path: Path,
    jobs: int,
) -> tuple[RunManifest, Any]:
    started = time.perf_counter()
    frame = run(spec, scenario, jobs)
    write_csv(frame, csv_path)
    manifest = RunManifest(
        tool_version=_resolve_version(),
        experiment=spec,
        scenario=scenario.model_dump(mode="json"),
        scenario_path=str(scenario_path) if scenario_path else None,
        csv=csv_path.name,
        columns=list(frame.columns),
        rows=len(frame),
        seed=scenario.simulation.seed,
        wall_time_s=time.perf_counter() - started,
    )
    manifest_path = manifest_path_for(csv_path)
    write_manifest(manifest, manifest_path)
    LOG.info("Wrote %s and %s", csv_path, manifest_path)
    return manifest, frame


def _run_experiment(args: argparse.Namespace, settings: RunnerSettings) -> int:
    spec = build_spec(args)
    scenario, scenario_path = resolve_scenario(spec, args.env, settings)
    csv_path = _output_path(spec)
    _log(f"Running {spec.kind.value}...", quiet=args.quiet)
    manifest, frame = _write_run(spec, scenario, scenario_path, csv_path, args.jobs)
    summary: Dict[str, Any] = {
        "kind": spec.kind.value,
        "csv": str(csv_path),
        "manifest": str(manifest_path_for(csv_path)),
        "rows": manifest.rows,
        "wall_time_s": round(manifest.wall_time_s, 3),
    }
    if spec.kind is ExperimentKind.VALIDATE:
        failed = frame[~frame["passed"].astype(bool)]
        summary["failed"] = [f"{row.fixture}: {row.criterion}" for row in failed.itertuples()]
        _print_json(summary, args.pretty)
        return EXIT_FAILED if len(failed) else EXIT_SUCCESS
    _print_json(summary, args.pretty)
    return EXIT_SUCCESS


def _run_diff(args: argparse.Namespace) -> int:
    report = diff_runs(Path(args.left), Path(args.right), args.tolerance)
    payload = report.model_dump(mode="json")
    payload["within_tolerance"] = report.within_tolerance
    _print_json(payload, args.pretty)
    return EXIT_SUCCESS if report.within_tolerance else EXIT_FAILED


def _run_replay(args: argparse.Namespace) -> int:
    manifest_path = Path(args.manifest)
    manifest = read_manifest(manifest_path)
    try:
        scenario = ScenarioConfig.model_validate(manifest.scenario)
    except ValidationError as exc:
        raise ConfigError(f"Manifest scenario is invalid: {exc}") from exc
    original = csv_for(manifest, manifest_path)
    csv_path = Path(args.out) if args.out else original.with_name(original.stem + ".replay.csv")
    if not csv_path.parent.is_dir():
        raise CLIError(f"Output directory {csv_path.parent} does not exist", EXIT_IO)
    _log(f"Replaying {manifest.experiment.kind.value} from {manifest_path}...", quiet=args.quiet)
    frame = run(manifest.experiment, scenario, args.jobs)
    write_csv(frame, csv_path)
    _print_json({"kind": manifest.experiment.kind.value, "csv": str(csv_path), "rows": len(frame)}, args.pretty)
    return EXIT_SUCCESS


def _run(argv: Iterable[str] | None = None) -> int:
    args = parse_args(argv)
    try:
        settings = RunnerSettings()
        _configure_logging(args, settings)
        if args.command == "diff":
            return _run_diff(args)
        if args.command == "replay":
            return _run_replay(args)
        return _run_experiment(args, settings)
    except CLIError as exc:
        _diagnose("usage" if exc.exit_code == EXIT_USAGE else "io", str(exc))
        return exc.exit_code
    except (ConfigError, ManifestError) as exc:
        _diagnose("config", str(exc))
        return EXIT_USAGE
    except NumericalError as exc:
        message = str(exc)
        if exc.estimated_error is not None:
            message = f"{message} (estimated error {exc.estimated_error:.3g})"
        _diagnose("numerical", message)
        return EXIT_NUMERICAL
    except OSError as exc:
        _diagnose("io", str(exc))
        return EXIT_IO
    except ValueError as exc:
        _diagnose("usage", str(exc))
        return EXIT_USAGE


def main(argv: Iterable[str] | None = None) -> None:
    raise SystemExit(_run(argv))


if __name__ == "__main__":
    main()
