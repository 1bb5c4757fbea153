"""Run manifests written next to every CSV, and comparison of two runs."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .experiments import ExperimentSpec

LOG = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MANIFEST_SUFFIX = ".manifest.json"


class ManifestError(Exception):
    """Raised when a manifest cannot be read or does not match its CSV."""


class RunManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: int = SCHEMA_VERSION
    tool_version: str
    experiment: ExperimentSpec
    scenario: Dict[str, Any]
    scenario_path: Optional[str] = None
    csv: str
    columns: List[str]
    rows: int
    seed: int
    wall_time_s: float = 0.0


def manifest_path_for(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + MANIFEST_SUFFIX)


def write_manifest(manifest: RunManifest, path: Path) -> None:
    path.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    LOG.debug("Wrote manifest %s", path)


def read_manifest(path: Path) -> RunManifest:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ManifestError(f"Manifest {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"Manifest {path} is not valid JSON: {exc}") from exc
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ManifestError(
            f"Manifest {path} has schema_version {data.get('schema_version')!r}, expected {SCHEMA_VERSION}"
        )
    try:
        return RunManifest.model_validate(data)
    except ValidationError as exc:
        raise ManifestError(f"Manifest {path} is invalid: {exc}") from exc


def csv_for(manifest: RunManifest, manifest_path: Path) -> Path:
    """CSV path recorded in a manifest, resolved against the manifest's directory."""
    csv = Path(manifest.csv)
    return csv if csv.is_absolute() else manifest_path.parent / csv


class ColumnDiff(BaseModel):
    column: str
    max_abs: float
    max_rel: float
    row: int


class DiffReport(BaseModel):
    left: str
    right: str
    tolerance: float
    same_shape: bool
    scenario_changes: Dict[str, List[Any]] = Field(default_factory=dict)
    columns: List[ColumnDiff] = Field(default_factory=list)
    mismatched_labels: int = 0

    @property
    def within_tolerance(self) -> bool:
        if not self.same_shape or self.mismatched_labels:
            return False
        return all(diff.max_rel <= self.tolerance for diff in self.columns)


def _flatten(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def _scenario_changes(left: Dict[str, Any], right: Dict[str, Any]) -> Dict[str, List[Any]]:
    a, b = _flatten(left), _flatten(right)
    return {key: [a.get(key), b.get(key)] for key in sorted(set(a) | set(b)) if a.get(key) != b.get(key)}


def _column_diff(name: str, left: pd.Series, right: pd.Series) -> Optional[ColumnDiff]:
    a = pd.to_numeric(left, errors="coerce")
    b = pd.to_numeric(right, errors="coerce")
    if a.isna().all() and b.isna().all():
        return None
    gap = (a - b).abs()
    both_inf = (a == b) & a.abs().eq(math.inf)
    gap = gap.mask(both_inf, 0.0).fillna(math.inf).where(~(a.isna() & b.isna()), 0.0)
    scale = pd.concat([a.abs(), b.abs()], axis=1).max(axis=1).clip(lower=1e-300)
    rel = (gap / scale).mask(gap == 0.0, 0.0)
    row = int(rel.to_numpy().argmax()) if len(rel) else 0
    return ColumnDiff(
        column=name,
        max_abs=float(gap.max()) if len(gap) else 0.0,
        max_rel=float(rel.max()) if len(rel) else 0.0,
        row=row,
    )


def diff_runs(left_path: Path, right_path: Path, tolerance: float = 1e-9) -> DiffReport:
    """Column-wise relative differences between two runs of the same experiment."""
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    left, right = read_manifest(left_path), read_manifest(right_path)
    frame_a = pd.read_csv(csv_for(left, left_path))
    frame_b = pd.read_csv(csv_for(right, right_path))
    report = DiffReport(
        left=str(left_path),
        right=str(right_path),
        tolerance=tolerance,
        same_shape=list(frame_a.columns) == list(frame_b.columns) and len(frame_a) == len(frame_b),
        scenario_changes=_scenario_changes(left.scenario, right.scenario),
    )
    if not report.same_shape:
        return report
    for name in frame_a.columns:
        if frame_a[name].dtype == object or frame_b[name].dtype == object:
            report.mismatched_labels += int((frame_a[name].astype(str) != frame_b[name].astype(str)).sum())
            continue
        diff = _column_diff(name, frame_a[name], frame_b[name])
        if diff is not None:
            report.columns.append(diff)
    return report
