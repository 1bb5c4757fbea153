"""Monte Carlo simulator of the exact hexagonal network and discrete-event queue oracle."""

from __future__ import annotations

import enum
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analysis import InterferenceField
from .channel import GainMixture, LinkState, LosModel, path_gain, sample_interferer_gain, sample_nakagami_power
from .config import ScenarioConfig, Scheme
from .geometry import Annulus, hex_lattice_centers, sample_in_hexagon

LOG = logging.getLogger(__name__)

BLOCK = 256
Z95 = 1.959963984540054


class Stream(enum.IntEnum):
    SUCCESS = 0
    META = 1
    QUEUE = 2
    TRAJECTORY = 3
    LAPLACE = 4


@dataclass(frozen=True)
class SeedStreams:
    """Counter-based substreams keyed by (seed, stream, index)."""

    seed: int

    def generator(self, stream: Stream, index: int = 0) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.seed, spawn_key=(int(stream), index))
        return np.random.Generator(np.random.Philox(sequence))


@dataclass(slots=True)
class SimRealization:
    """A block of independent network snapshots around the reference cell."""

    serving_distance: np.ndarray
    serving_los: np.ndarray
    serving_fading: np.ndarray
    interferer_distance: np.ndarray
    interferer_los: np.ndarray
    interferer_fading: np.ndarray
    interferer_gain: np.ndarray
    active: np.ndarray


def _fading(rng: np.random.Generator, los: np.ndarray, m_los: int, m_nlos: int) -> np.ndarray:
    return np.where(
        los,
        sample_nakagami_power(rng, m_los, los.shape),
        sample_nakagami_power(rng, m_nlos, los.shape),
    )


def _hover_offsets(rng: np.random.Generator, eta: float, clip: float | None, size: int) -> np.ndarray:
    offset = np.abs(rng.normal(0.0, eta, size))
    if clip is None:
        return offset
    # redraw until every offset lies inside the clip
    far = offset > clip * eta
    while np.any(far):
        offset[far] = np.abs(rng.normal(0.0, eta, int(far.sum())))
        far = offset > clip * eta
    return offset


def _serving_geometry(
    rng: np.random.Generator, scenario: ScenarioConfig, scheme: Scheme, size: int
) -> tuple[np.ndarray, np.ndarray]:
    """(UAV positions, serving horizontal distances) for ``size`` snapshots."""
    R = scenario.geometry.R
    if scheme is Scheme.URDC:
        device = sample_in_hexagon(rng, R, size)
        offset = _hover_offsets(rng, scenario.geometry.eta, scenario.geometry.offset_clip, size)
        heading = rng.uniform(0.0, 2.0 * math.pi, size)
        uav = device + offset[:, None] * np.column_stack([np.cos(heading), np.sin(heading)])
        return uav, offset
    device = sample_in_hexagon(rng, R, size)
    return np.zeros((size, 2)), np.hypot(device[:, 0], device[:, 1])


def build_realization(
    rng: np.random.Generator,
    scenario: ScenarioConfig,
    scheme: Scheme,
    size: int,
    serving_distance: np.ndarray | None = None,
    serving_los: np.ndarray | None = None,
) -> SimRealization:
    """Sample ``size`` snapshots; serving geometry may be pinned for conditional estimates."""
    geo, ch = scenario.geometry, scenario.channel
    los_model = LosModel(scenario.profile, geo.h)
    centers = hex_lattice_centers(scenario.simulation.rings, geo.R)[1:]
    uav, distance = _serving_geometry(rng, scenario, scheme, size)
    if serving_distance is not None:
        distance = np.broadcast_to(serving_distance, (size,)).astype(float)
    if serving_los is None:
        serving_los = rng.random(size) < los_model(distance)
    else:
        serving_los = np.broadcast_to(serving_los, (size,)).astype(bool)
    offsets = sample_in_hexagon(rng, geo.R, size * len(centers)).reshape(size, len(centers), 2)
    positions = centers[None, :, :] + offsets
    gaps = positions - uav[:, None, :]
    interferer_distance = np.hypot(gaps[..., 0], gaps[..., 1])
    interferer_los = rng.random(interferer_distance.shape) < los_model(interferer_distance)
    duty = scenario.traffic.duty if scheme is Scheme.URDC else 1.0
    return SimRealization(
        serving_distance=distance,
        serving_los=serving_los,
        serving_fading=_fading(rng, serving_los, ch.m_L, ch.m_N),
        interferer_distance=interferer_distance,
        interferer_los=interferer_los,
        interferer_fading=_fading(rng, interferer_los, ch.m_L, ch.m_N),
        interferer_gain=sample_interferer_gain(
            rng, GainMixture.from_antenna(scenario.antenna), interferer_distance.shape
        ),
        active=rng.random(interferer_distance.shape) < duty,
    )


def realization_sinr(realization: SimRealization, scenario: ScenarioConfig) -> np.ndarray:
    ch, h = scenario.channel, scenario.geometry.h
    mix = GainMixture.from_antenna(scenario.antenna)
    serving_alpha = np.where(realization.serving_los, ch.alpha_L, ch.alpha_N)
    signal = ch.P * mix.main_gain * realization.serving_fading * path_gain(
        realization.serving_distance, h, serving_alpha
    )
    alpha = np.where(realization.interferer_los, ch.alpha_L, ch.alpha_N)
    received = (
        ch.P
        * realization.interferer_gain
        * realization.interferer_fading
        * path_gain(realization.interferer_distance, h, alpha)
    )
    interference = np.sum(received * realization.active, axis=1)
    return signal / (interference + ch.sigma2)


def simulate_sinr(streams: SeedStreams, scenario: ScenarioConfig, scheme: Scheme, trials: int) -> np.ndarray:
    """SINR of ``trials`` independent snapshots; block ``k`` always uses substream ``k``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    blocks = []
    for index, start in enumerate(range(0, trials, BLOCK)):
        rng = streams.generator(Stream.SUCCESS, index)
        size = min(BLOCK, trials - start)
        blocks.append(realization_sinr(build_realization(rng, scenario, scheme, size), scenario))
    return np.concatenate(blocks)


@dataclass(slots=True)
class SimulationEstimate:
    theta: float
    value: float
    ci_halfwidth: float
    trials: int
    seed: int


def success_from_sinr(sinr: np.ndarray, thetas: Sequence[float], seed: int) -> list[SimulationEstimate]:
    trials = len(sinr)
    out = []
    for theta in thetas:
        p = float(np.mean(sinr >= theta))
        half = Z95 * math.sqrt(p * (1.0 - p) / trials)
        out.append(SimulationEstimate(theta=float(theta), value=p, ci_halfwidth=half, trials=trials, seed=seed))
    return out


def simulate_success(
    streams: SeedStreams, scenario: ScenarioConfig, scheme: Scheme, theta: float, trials: int
) -> SimulationEstimate:
    sinr = simulate_sinr(streams, scenario, scheme, trials)
    return success_from_sinr(sinr, [theta], streams.seed)[0]


@dataclass(slots=True)
class EmpiricalCcdf:
    values: np.ndarray

    def __call__(self, X: float | np.ndarray) -> np.ndarray:
        """Fraction of geometries whose conditional success exceeds ``X``."""
        X = np.asarray(X, dtype=float)
        below = np.searchsorted(self.values, X, side="right")
        return 1.0 - below / len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))


def simulate_meta(
    streams: SeedStreams,
    scenario: ScenarioConfig,
    theta: float,
    n_geometries: int,
    n_fadings: int,
    scheme: Scheme = Scheme.URDC,
) -> EmpiricalCcdf:
    """Conditional success of pinned (serving distance, LOS state) pairs over everything else."""
    if n_geometries < 1 or n_fadings < 1:
        raise ValueError("n_geometries and n_fadings must be >= 1")
    los_model = LosModel(scenario.profile, scenario.geometry.h)
    values = np.empty(n_geometries)
    for g in range(n_geometries):
        rng = streams.generator(Stream.META, g)
        _, distance = _serving_geometry(rng, scenario, scheme, 1)
        los = bool(rng.random() < los_model(distance[0]))
        hits = 0
        for start in range(0, n_fadings, BLOCK):
            size = min(BLOCK, n_fadings - start)
            snapshot = build_realization(rng, scenario, scheme, size, distance[0], los)
            hits += int(np.sum(realization_sinr(snapshot, scenario) >= theta))
        values[g] = hits / n_fadings
    return EmpiricalCcdf(np.sort(values))


@dataclass(slots=True)
class QueueSimResult:
    Q_L: float
    Q_W: float
    idle_fraction: float
    drift: bool
    packets: int
    slots: int


def simulate_queue(
    rng: np.random.Generator, N_d: int, alpha: float, S_p: float, slots: int, chunk: int = 1_000_000
) -> QueueSimResult:
    """Slot-by-slot FIFO buffer with one transmission attempt per ``N_d``-slot cycle.

    A packet arriving in slot ``t`` joins the buffer at the end of the slot. The
    head-of-line packet is attempted in the last slot of each cycle and leaves
    with probability ``S_p``; after every attempt, and whenever a packet starts
    service on an empty buffer, the cycle starts over. ``Q_W`` is the mean
    sojourn of the departed packets in slots, ``Q_L`` the buffer content
    averaged over slot boundaries.
    """
    if N_d < 1 or slots < 1:
        raise ValueError("N_d and slots must be >= 1")
    if not 0.0 < S_p <= 1.0:
        raise ValueError("S_p must be in (0, 1]")
    buffer: deque[int] = deque()
    phase = 1
    content_sum = 0
    idle_slots = 0
    sojourn_sum = 0
    departed = 0
    arrived = 0
    checkpoints = set(np.linspace(slots / 10, slots, 10).astype(np.int64).tolist())
    content_at: list[int] = []
    for start in range(0, slots, chunk):
        size = min(chunk, slots - start)
        arrivals = (rng.random(size) < alpha).tolist()
        attempts = (rng.random(size) < S_p).tolist()
        for offset in range(size):
            t = start + offset
            if buffer:
                if phase == N_d:
                    if attempts[offset]:
                        sojourn_sum += t + 1 - buffer.popleft()
                        departed += 1
                    phase = 1
                else:
                    phase += 1
            else:
                idle_slots += 1
            if arrivals[offset]:
                if not buffer:
                    phase = 1
                buffer.append(t + 1)
                arrived += 1
            content_sum += len(buffer)
            if t + 1 in checkpoints:
                content_at.append(len(buffer))
    Q_W = sojourn_sum / departed if departed else 0.0
    drift = len(content_at) > 1 and bool(np.all(np.diff(content_at) > 0))
    LOG.debug("Queue DES: %d packets, %d departed, Q_W=%.4g, drift=%s", arrived, departed, Q_W, drift)
    return QueueSimResult(content_sum / slots, Q_W, idle_slots / slots, drift, arrived, slots)


def estimate_laplace(
    rng: np.random.Generator,
    field: InterferenceField,
    s: float,
    component: LinkState,
    realizations: int,
    outer_radius: float,
    chunk: int = 5000,
) -> tuple[float, float]:
    """Sample mean and standard error of exp(-s I) for one LOS component of a finite field."""
    if outer_radius <= field.exclusion_radius:
        raise ValueError("outer_radius must exceed the exclusion radius")
    ch, h = field.channel, field.los.h
    alpha, m = (ch.alpha_L, ch.m_L) if component is LinkState.LOS else (ch.alpha_N, ch.m_N)
    region = Annulus(field.exclusion_radius, outer_radius)
    samples = []
    for start in range(0, realizations, chunk):
        size = min(chunk, realizations - start)
        counts = rng.poisson(field.intensity * region.area, size=size)
        points = region.sample_uniform(rng, int(counts.sum()))
        r = np.hypot(points[:, 0], points[:, 1])
        keep = rng.random(len(r)) < field.los(r)
        if component is LinkState.NLOS:
            keep = ~keep
        power = (
            ch.P
            * sample_interferer_gain(rng, field.mix, len(r))
            * sample_nakagami_power(rng, m, len(r))
            * path_gain(r, h, alpha)
        )
        owner = np.repeat(np.arange(size), counts)
        interference = np.bincount(owner, weights=power * keep, minlength=size)
        samples.append(np.exp(-s * interference))
    values = np.concatenate(samples)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))
