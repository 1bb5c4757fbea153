"""Meta-distribution of the conditional success probability.

Real moments come from the binomial expansion of the failure term. Imaginary moments
use the generalized binomial series while its accumulated round-off stays bounded and
otherwise fall back to the atoms of the conditional success over (offset, LOS state).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from .analysis import LinkAnalyzer, geometry_nodes, scheme_threshold
from .channel import LinkState
from .config import ScenarioConfig, Scheme
from .errors import NumericalError
from .quadrature import QuadratureSpec, gauss_panel

LOG = logging.getLogger(__name__)

EPS = np.finfo(float).eps
SERIES = "series"
DIRECT = "direct"
_CLAMP_SLACK = 1e-3


@dataclass(frozen=True)
class MetaMomentRequest:
    theta: float
    t: float
    z_max: int = 200
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self) -> None:
        if not math.isfinite(self.theta) or self.theta <= 0:
            raise ValueError("theta must be > 0")
        if not math.isfinite(self.t) or self.t < 0:
            raise ValueError("t must be >= 0")
        if self.z_max < 1:
            raise ValueError("z_max must be >= 1")


@dataclass(slots=True)
class ImaginaryMoment:
    value: complex
    path: str
    terms: int
    tail_estimate: float


@dataclass(slots=True)
class MetaDistributionPoint:
    X: float
    value: float
    est_error: float
    path: str


class MetaAnalyzer:
    """Caches per-node failure moments for one (scenario, scheme, theta)."""

    def __init__(
        self,
        scenario: ScenarioConfig,
        theta: float,
        scheme: Scheme = Scheme.URDC,
        spec: Optional[QuadratureSpec] = None,
    ) -> None:
        if not math.isfinite(theta) or theta <= 0:
            raise ValueError("theta must be > 0")
        self.theta = theta
        self.scheme = scheme
        self.link = LinkAnalyzer(scenario, scheme, spec)
        self.spec = self.link.spec
        self.nodes, self.weights = geometry_nodes(scenario, scheme, self.spec)
        self.p = np.array([self.link.p_los(float(r)) for r in self.nodes])
        self._terms: dict[LinkState, list[tuple[np.ndarray, np.ndarray]]] = {}
        self._z: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}
        self._atoms: Optional[tuple[np.ndarray, np.ndarray]] = None

    def _exponentials(self, state: LinkState, n_max: int) -> list[tuple[np.ndarray, np.ndarray]]:
        cached = self._terms.get(state)
        if cached is None or len(cached[0][0]) <= n_max:
            # grow geometrically so repeated calls reuse the transform cache
            size = max(n_max, 2 * (len(cached[0][0]) - 1) if cached else n_max)
            cached = [
                self.link.exponential_terms(state, float(r), self.theta, size) for r in self.nodes
            ]
            self._terms[state] = cached
        return cached

    def failure_moments(self, z: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Per-node z-th failure moments and round-off bounds: (z_L, err_L, z_N, err_N)."""
        if z in self._z:
            return self._z[z]
        out = []
        for state in (LinkState.LOS, LinkState.NLOS):
            top = self.link.shape(state) * z
            n = np.arange(top + 1)
            coeffs = special.comb(top, n)
            signed = (-1.0) ** n * coeffs
            moments = np.empty(len(self.nodes))
            bounds = np.empty(len(self.nodes))
            for i, (values, errors) in enumerate(self._exponentials(state, top)):
                moments[i] = float(np.dot(signed, values[: top + 1]))
                bounds[i] = float(EPS * np.dot(coeffs, values[: top + 1]) + np.dot(coeffs, errors[: top + 1]))
            out.extend([moments, bounds])
        result = (out[0], out[1], out[2], out[3])
        self._z[z] = result
        return result

    def mixture_moment(self, z: int, b: float | complex = 1.0) -> tuple[complex, float]:
        """Geometry-averaged z-th failure moment with its error bound."""
        z_l, err_l, z_n, err_n = self.failure_moments(z)
        if self.spec.moment_weighting == "state-power":
            p_los = np.clip(self.p, 1e-300, 1.0).astype(complex) ** b
            p_nlos = np.clip(1.0 - self.p, 1e-300, 1.0).astype(complex) ** b
        else:
            p_los, p_nlos = self.p, 1.0 - self.p
        value = np.sum(self.weights * (p_los * z_l + p_nlos * z_n))
        bound = np.sum(self.weights * (np.abs(p_los) * err_l + np.abs(p_nlos) * err_n))
        if self.spec.moment_weighting != "state-power":
            value = float(np.real(value))
        return value, float(bound)

    def moment(self, b: int) -> float:
        if b < 0:
            raise ValueError("b must be >= 0")
        if b == 0:
            return 1.0
        total = 0.0
        for z in range(b + 1):
            value, _ = self.mixture_moment(z, b)
            total += (-1.0) ** z * math.comb(b, z) * float(np.real(value))
        return min(max(total, 0.0), 1.0)

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """(conditional success, weight) for every (node, LOS state) pair."""
        if self._atoms is None:
            los = np.array([self.link.conditional(LinkState.LOS, float(r), self.theta)[0] for r in self.nodes])
            nlos = np.array([self.link.conditional(LinkState.NLOS, float(r), self.theta)[0] for r in self.nodes])
            values = np.concatenate([los, nlos])
            weights = np.concatenate([self.weights * self.p, self.weights * (1.0 - self.p)])
            self._atoms = (np.clip(values, 1e-300, 1.0), weights)
        return self._atoms

    def direct_imaginary(self, t: float) -> complex:
        values, weights = self.atoms()
        return complex(np.sum(weights * np.exp(1j * t * np.log(values))))

    def series_imaginary(self, t: float, z_cap: Optional[int] = None) -> Optional[ImaginaryMoment]:
        """Generalized binomial series; None when it cannot be trusted."""
        cap = z_cap or self.spec.series_z_cap
        jt = 1j * t
        coeff = 1.0 + 0j
        value, _ = self.mixture_moment(0, jt)
        partial = complex(value)
        roundoff = 0.0
        for z in range(1, cap + 1):
            if self.spec.factorial == "falling":
                coeff *= (jt - z + 1) / z
            else:
                coeff *= (jt + z - 1) / z
            moment, bound = self.mixture_moment(z, jt)
            term = (-1.0) ** z * coeff * moment
            partial += term
            roundoff += abs(coeff) * bound
            if roundoff > self.spec.series_error_tol:
                LOG.debug("Series for t=%.4g dropped at z=%d: round-off %.2g", t, z, roundoff)
                return None
            if abs(term) < self.spec.series_tol * abs(partial):
                return ImaginaryMoment(value=partial, path=SERIES, terms=z, tail_estimate=abs(term))
        LOG.debug("Series for t=%.4g did not settle within %d terms", t, cap)
        return None

    def imaginary_moment(self, t: float, z_max: Optional[int] = None) -> ImaginaryMoment:
        if t < 0:
            raise ValueError("t must be >= 0")
        if t == 0:
            return ImaginaryMoment(value=1.0 + 0j, path=SERIES, terms=0, tail_estimate=0.0)
        series = self.series_imaginary(t, z_max)
        if series is not None:
            return series
        return ImaginaryMoment(value=self.direct_imaginary(t), path=DIRECT, terms=0, tail_estimate=0.0)

    def _direct_ccdf(self, X: float) -> float:
        values, weights = self.atoms()
        # closed-form inversion integral of each atom's exp(jt ln S) term
        return float(np.sum(weights * 0.5 * (1.0 + np.sign(np.log(values) - math.log(X)))))

    def _series_ccdf(self, X: float) -> Optional[tuple[float, float]]:
        spec = self.spec
        y = math.log(X)
        width = min(spec.gp_t_cap / 50.0, math.pi / (2.0 * max(abs(y), 1e-3)))
        start, total, error, quiet = 0.0, 0.0, 0.0, 0
        while start < spec.gp_t_cap:
            stop = min(start + width, spec.gp_t_cap)
            nodes, weights = gauss_panel(start, stop, spec.gp_panel_nodes)
            peak = 0.0
            for t, w in zip(nodes, weights):
                moment = self.series_imaginary(float(t))
                if moment is None:
                    return None
                total += w * (np.exp(-1j * t * y) * moment.value).imag / t
                error += w * moment.tail_estimate / t
                peak = max(peak, abs(moment.value))
            quiet = quiet + 1 if peak < spec.gp_decay_tol else 0
            if quiet >= spec.gp_decay_panels:
                return 0.5 + total / math.pi, error / math.pi
            start = stop
        LOG.debug("Imaginary moments did not decay by t=%.4g", spec.gp_t_cap)
        return None

    def ccdf(self, X: float) -> MetaDistributionPoint:
        if not 0.0 < X < 1.0:
            raise ValueError("X must be in (0, 1)")
        series = self._series_ccdf(X)
        if series is not None:
            raw, error, path = series[0], series[1], SERIES
        else:
            raw, error, path = self._direct_ccdf(X), 0.0, DIRECT
        if not math.isfinite(raw):
            raise NumericalError(f"meta-distribution at X={X} is not finite", estimated_error=error)
        if raw < -_CLAMP_SLACK or raw > 1.0 + _CLAMP_SLACK:
            LOG.warning("Meta-distribution at X=%.4g left [0, 1] before clamping: %.6g", X, raw)
        return MetaDistributionPoint(X=X, value=min(max(raw, 0.0), 1.0), est_error=error, path=path)


def meta_moment(
    scenario: ScenarioConfig,
    theta: Optional[float],
    b: int,
    spec: Optional[QuadratureSpec] = None,
    scheme: Scheme = Scheme.URDC,
) -> float:
    """b-th moment of the conditional success probability."""
    if b < 0:
        raise ValueError("b must be >= 0")
    if b == 0:
        return 1.0
    theta = scheme_threshold(scenario, scheme) if theta is None else theta
    return MetaAnalyzer(scenario, theta, scheme, spec).moment(b)


def meta_moment_imaginary(
    scenario: ScenarioConfig,
    request: MetaMomentRequest,
    scheme: Scheme = Scheme.URDC,
) -> ImaginaryMoment:
    analyzer = MetaAnalyzer(scenario, request.theta, scheme, request.quad)
    moment = analyzer.imaginary_moment(request.t, request.z_max)
    LOG.debug("Imaginary moment t=%.4g via %s (%d terms)", request.t, moment.path, moment.terms)
    return moment


def meta_distribution(
    scenario: ScenarioConfig,
    theta: Optional[float],
    X: float,
    spec: Optional[QuadratureSpec] = None,
    scheme: Scheme = Scheme.URDC,
) -> MetaDistributionPoint:
    """Fraction of links whose conditional success probability exceeds ``X``."""
    theta = scheme_threshold(scenario, scheme) if theta is None else theta
    point = MetaAnalyzer(scenario, theta, scheme, spec).ccdf(X)
    LOG.info("Meta-distribution at X=%.4g via %s path", X, point.path)
    return point
