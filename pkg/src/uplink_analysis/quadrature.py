"""Quadrature settings and the integration rules used by the analysis."""

from __future__ import annotations

import logging
import math
from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import integrate

from .errors import NumericalError

LOG = logging.getLogger(__name__)


class QuadratureSpec(BaseModel):
    """Tolerances and rule sizes for every integral the analysis evaluates."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    scheme: Literal["qags"] = "qags"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-13
    max_subdivisions: int = 200
    # r = excl + scale * u / (1 - u), u in [0, 1)
    semi_infinite_map: Literal["rational"] = "rational"
    accept_tol: float = 1e-6
    offset_nodes: int = 48
    offset_span: float = 8.0
    cell_positions: int = 256
    gp_panel_nodes: int = 32
    gp_t_cap: float = 200.0
    gp_decay_tol: float = 1e-6
    gp_decay_panels: int = 5
    series_tol: float = 1e-9
    series_z_cap: int = 200
    series_error_tol: float = 1e-6
    factorial: Literal["falling", "rising"] = "falling"
    moment_weighting: Literal["mixture", "state-power"] = "mixture"

    @model_validator(mode="after")
    def _validate_tolerances(self) -> "QuadratureSpec":
        for name in ("rel_tol", "abs_tol", "accept_tol", "gp_decay_tol", "series_tol", "series_error_tol"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"numerics.{name} must be > 0")
        if self.max_subdivisions < 1:
            raise ValueError("numerics.max_subdivisions must be >= 1")
        if self.offset_nodes < 2 or self.gp_panel_nodes < 2:
            raise ValueError("numerics node counts must be >= 2")
        if self.offset_span <= 0 or self.gp_t_cap <= 0:
            raise ValueError("numerics.offset_span and numerics.gp_t_cap must be > 0")
        if self.cell_positions < 100:
            raise ValueError("numerics.cell_positions must be >= 100")
        if self.series_z_cap < 1 or self.gp_decay_panels < 1:
            raise ValueError("numerics.series_z_cap and numerics.gp_decay_panels must be >= 1")
        return self


DEFAULT_QUADRATURE = QuadratureSpec()


def integrate_semi_infinite(
    func: Callable[[float], float],
    lower: float,
    scale: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> tuple[float, float]:
    """Integrate ``func`` over ``[lower, inf)`` and return (value, error estimate)."""
    if scale <= 0:
        raise ValueError("scale must be positive")

    def mapped(u: float) -> float:
        gap = 1.0 - u
        if gap <= 0.0:
            return 0.0
        return func(lower + scale * u / gap) * scale / (gap * gap)

    result = integrate.quad(
        mapped,
        0.0,
        1.0,
        epsabs=spec.abs_tol,
        epsrel=spec.rel_tol,
        limit=spec.max_subdivisions,
        full_output=1,
    )
    value, error = float(result[0]), float(result[1])
    if len(result) > 3:
        bound = max(spec.accept_tol * abs(value), 1e3 * spec.abs_tol)
        if not math.isfinite(value) or error > bound:
            raise NumericalError(
                f"radial quadrature did not converge: {result[3]}",
                estimated_error=error,
            )
        LOG.warning("Accepting flagged quadrature (value=%.6g, error=%.2g)", value, error)
    return value, error


def half_normal_nodes(
    sd: float, spec: QuadratureSpec = DEFAULT_QUADRATURE, clip: Optional[float] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on [0, span*sd] with weights of the folded zero-mean normal density.

    With ``clip`` the density is cut at ``clip*sd`` and renormalized.
    """
    if sd < 0:
        raise ValueError("sd must be >= 0")
    if clip is not None and clip <= 0:
        raise ValueError("clip must be > 0")
    if sd == 0:
        return np.zeros(1), np.ones(1)
    x, w = np.polynomial.legendre.leggauss(spec.offset_nodes)
    span = spec.offset_span if clip is None else min(clip, spec.offset_span)
    upper = span * sd
    nodes = 0.5 * upper * (x + 1.0)
    density = 2.0 * np.exp(-0.5 * (nodes / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))
    if clip is not None:
        density /= math.erf(span / math.sqrt(2.0))
    return nodes, 0.5 * upper * w * density


def gauss_panel(start: float, stop: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (stop - start)
    return start + half * (x + 1.0), half * w
