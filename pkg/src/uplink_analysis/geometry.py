"""Hexagonal cells, point processes, greedy trajectories and travel kinematics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from scipy import stats
from scipy.stats import qmc

from .config import KinematicsConfig, ScenarioConfig

LOG = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)


class Region(Protocol):
    @property
    def area(self) -> float: ...

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray: ...


@dataclass(frozen=True)
class Rectangle:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        x = rng.uniform(self.x0, self.x1, size=n)
        y = rng.uniform(self.y0, self.y1, size=n)
        return np.column_stack([x, y])


@dataclass(frozen=True)
class Annulus:
    inner: float
    outer: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if not 0 <= self.inner <= self.outer:
            raise ValueError("annulus radii must satisfy 0 <= inner <= outer")

    @property
    def area(self) -> float:
        return math.pi * (self.outer**2 - self.inner**2)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # inverse CDF of the radius, density proportional to r
        radius = np.sqrt(rng.uniform(self.inner**2, self.outer**2, size=n))
        angle = rng.uniform(0.0, 2.0 * math.pi, size=n)
        return np.column_stack(
            [self.center[0] + radius * np.cos(angle), self.center[1] + radius * np.sin(angle)]
        )


def disk(radius: float, center: tuple[float, float] = (0.0, 0.0)) -> Annulus:
    return Annulus(0.0, radius, center)


@dataclass(frozen=True)
class HexCell:
    """Flat-top regular hexagon with circumradius ``R``."""

    R: float
    center: tuple[float, float] = (0.0, 0.0)

    @property
    def area(self) -> float:
        return 1.5 * SQRT3 * self.R**2

    def vertices(self) -> np.ndarray:
        angles = np.arange(6) * (math.pi / 3.0)
        return np.column_stack(
            [self.center[0] + self.R * np.cos(angles), self.center[1] + self.R * np.sin(angles)]
        )

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(points)
        x = np.abs(pts[:, 0] - self.center[0])
        y = np.abs(pts[:, 1] - self.center[1])
        slack = tol * self.R
        return (y <= 0.5 * SQRT3 * self.R + slack) & (SQRT3 * x + y <= SQRT3 * self.R + slack)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return sample_in_hexagon(rng, self.R, n, self.center)


def sample_in_hexagon(
    rng: np.random.Generator, R: float, n: int, center: Sequence[float] = (0.0, 0.0)
) -> np.ndarray:
    """Uniform points in a flat-top hexagon via its six equilateral triangles."""
    if n == 0:
        return np.empty((0, 2))
    verts = HexCell(R).vertices()
    k = rng.integers(0, 6, size=n)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip], v[flip] = 1.0 - u[flip], 1.0 - v[flip]
    a = verts[k]
    b = verts[(k + 1) % 6]
    pts = u[:, None] * a + v[:, None] * b
    return pts + np.asarray(center, dtype=float)


def sample_ppp(rng: np.random.Generator, intensity: float, region: Region) -> np.ndarray:
    """Homogeneous Poisson point process restricted to ``region``."""
    if intensity < 0:
        raise ValueError("intensity must be >= 0")
    count = rng.poisson(intensity * region.area)
    if count == 0:
        return np.empty((0, 2))
    return region.sample_uniform(rng, int(count))


def hex_lattice_centers(rings: int, R: float) -> np.ndarray:
    """Cell centers within hex distance ``rings`` of the origin, origin first."""
    if rings < 0:
        raise ValueError("rings must be >= 0")
    coords = [(0, 0)]
    for q in range(-rings, rings + 1):
        for r in range(max(-rings, -q - rings), min(rings, -q + rings) + 1):
            if q == 0 and r == 0:
                continue
            coords.append((q, r))
    axial = np.asarray(coords, dtype=float)
    x = 1.5 * R * axial[:, 0]
    y = SQRT3 * R * (axial[:, 1] + 0.5 * axial[:, 0])
    return np.column_stack([x, y])


def hexagon_positions(R: float, n: int) -> np.ndarray:
    """First ``n`` unscrambled Halton points of the bounding box lying in the hexagon."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sampler = qmc.Halton(d=2, scramble=False)
    cell = HexCell(R)
    half_height = 0.5 * SQRT3 * R
    kept: list[np.ndarray] = []
    total = 0
    while total < n:
        batch = sampler.random(2 * n)
        pts = np.column_stack([R * (2.0 * batch[:, 0] - 1.0), half_height * (2.0 * batch[:, 1] - 1.0)])
        inside = pts[cell.contains(pts, tol=0.0)]
        kept.append(inside)
        total += len(inside)
    return np.concatenate(kept)[:n]


def disc_positions(radius: float, n: int) -> np.ndarray:
    """First ``n`` unscrambled Halton points mapped area-preserving onto a disc."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = qmc.Halton(d=2, scramble=False).random(n)
    r = radius * np.sqrt(u[:, 0])
    phi = 2.0 * math.pi * u[:, 1]
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def segment_contact_intensity(N_d: int, i: int, R: float) -> float:
    """Intensity of the not-yet-visited devices before hop ``i`` of an ``N_d``-device tour."""
    return 2.0 * (N_d - i) / (3.0 * SQRT3 * R**2)


def _harmonic_half(n: int) -> float:
    return float(np.sum(np.arange(1, n + 1, dtype=float) ** -0.5))


def avg_segment_exact(N_d: int, R: float) -> float:
    """Mean hop length of a greedy tour through ``N_d`` devices."""
    if N_d < 1:
        raise ValueError("N_d must be >= 1")
    # mean contact distance of a PPP with intensity lam is 1 / (2 sqrt(lam))
    return R * math.sqrt(3.0 * SQRT3 / 8.0) * _harmonic_half(int(N_d)) / N_d


def avg_segment_jensen(N: int, R: float) -> float:
    """Mean hop length with the device count pinned to its mean ``N``.

    Each hop ``i`` is a contact distance 1 / (2 sqrt(lam_i)) in a field of
    ``N - i`` remaining devices; the hops are averaged over the tour. Since the
    per-count mean is convex in the count, this plug-in value is a lower bound
    on the Poisson average in ``avg_segment_poisson``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    intensities = np.array([segment_contact_intensity(int(N), i, R) for i in range(int(N))])
    return float(np.mean(0.5 / np.sqrt(intensities)))


def avg_segment_poisson(N_mean: float, R: float, tail: float = 1e-12) -> float:
    """E[avg_segment_exact(N_d, R) | N_d >= 1] for Poisson ``N_d``."""
    if N_mean <= 0:
        raise ValueError("N_mean must be > 0")
    upper = max(1, int(stats.poisson.isf(tail, N_mean)) + 1)
    n = np.arange(1, upper + 1)
    pmf = stats.poisson.pmf(n, N_mean)
    exact = R * math.sqrt(3.0 * SQRT3 / 8.0) * np.cumsum(n.astype(float) ** -0.5) / n
    return float(np.sum(pmf * exact) / -math.expm1(-N_mean))


def greedy_path(start: np.ndarray, devices: np.ndarray) -> np.ndarray:
    """Hop lengths of a nearest-unvisited tour from ``start``; ties go to the lowest index."""
    count = len(devices)
    lengths = np.empty(count)
    visited = np.zeros(count, dtype=bool)
    position = np.asarray(start, dtype=float)
    for step in range(count):
        dist = np.hypot(devices[:, 0] - position[0], devices[:, 1] - position[1])
        dist[visited] = np.inf
        nxt = int(np.argmin(dist))
        lengths[step] = dist[nxt]
        visited[nxt] = True
        position = devices[nxt]
    return lengths


def simulate_greedy_trajectory(rng: np.random.Generator, N_mean: float, R: float) -> list[float]:
    if N_mean <= 0:
        raise ValueError("N_mean must be > 0")
    n_d = int(rng.poisson(N_mean))
    devices = sample_in_hexagon(rng, R, n_d)
    start = sample_in_hexagon(rng, R, 1)[0]
    return greedy_path(start, devices).tolist()


def greedy_segment_mean(rng: np.random.Generator, N_mean: float, R: float, runs: int) -> tuple[float, int]:
    """Average of per-run mean hop lengths over runs that drew at least one device."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    means: list[float] = []
    for _ in range(runs):
        segments = simulate_greedy_trajectory(rng, N_mean, R)
        if segments:
            means.append(sum(segments) / len(segments))
    if not means:
        return math.nan, 0
    return float(np.mean(means)), len(means)


def travel_time(d_avg: float, kin: KinematicsConfig, physical: bool = False) -> float:
    """Time to cover one average segment with the accelerate-cruise-decelerate profile.

    The short-hop branch uses sqrt(d / (a_u + a_d)) unless ``physical`` is set,
    in which case the triangular-profile time is used instead.
    """
    if d_avg < 0:
        raise ValueError("d_avg must be >= 0")
    knot = kin.s_u + kin.s_d
    accel_sum = kin.a_u + kin.a_d
    closed_short = math.sqrt(d_avg / accel_sum)
    physical_short = math.sqrt(2.0 * d_avg * accel_sum / (kin.a_u * kin.a_d))
    cruise = kin.t_u + kin.t_d + (d_avg - knot) / kin.v
    if math.isclose(d_avg, knot, rel_tol=1e-9):
        LOG.debug(
            "Travel-time knot d=%.6g: short=%.6g physical=%.6g cruise=%.6g",
            d_avg,
            closed_short,
            physical_short,
            cruise,
        )
    if d_avg <= knot:
        return physical_short if physical else closed_short
    return cruise


def timing_from_travel(scenario: ScenarioConfig, ratio: float = 1.0, physical: bool = False) -> ScenarioConfig:
    """Rebuild the slot timing so that t_DC = ratio * t_V and T_s = t_DC + t_V."""
    if not math.isfinite(ratio) or ratio <= 0:
        raise ValueError("ratio must be > 0")
    n_mean = max(1, int(round(scenario.geometry.devices_per_cell)))
    t_v = travel_time(avg_segment_jensen(n_mean, scenario.geometry.R), scenario.kinematics, physical)
    t_dc = ratio * t_v
    return scenario.updated({"traffic.t_DC": t_dc, "traffic.T_s": t_dc + t_v})
