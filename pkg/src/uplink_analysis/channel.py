"""Air-to-ground channel: LOS probability, path loss, fading and antenna gains."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .config import AntennaConfig, EnvironmentProfile


class LinkState(str, enum.Enum):
    LOS = "los"
    NLOS = "nlos"


@dataclass(frozen=True)
class LosModel:
    """Sigmoid LOS probability seen by a UAV hovering at altitude ``h``."""

    profile: EnvironmentProfile
    h: float

    def _odds(self, r: float | np.ndarray) -> float | np.ndarray:
        # elevation in degrees; arctan2 gives 90 at r = 0
        angle = np.degrees(np.arctan2(self.h, np.abs(r)))
        return self.profile.a * np.exp(-self.profile.b * (angle - self.profile.a))

    def __call__(self, r: float | np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + self._odds(np.asarray(r, dtype=float)))

    def at(self, r: float) -> float:
        """Scalar LOS probability for use inside quadrature callbacks."""
        angle = math.degrees(math.atan2(self.h, abs(r)))
        q = self.profile.a * math.exp(-self.profile.b * (angle - self.profile.a))
        return 1.0 / (1.0 + q)

    def nlos_at(self, r: float) -> float:
        angle = math.degrees(math.atan2(self.h, abs(r)))
        q = self.profile.a * math.exp(-self.profile.b * (angle - self.profile.a))
        return q / (1.0 + q)


def p_los(profile: EnvironmentProfile, h: float, r: float | np.ndarray) -> np.ndarray:
    return LosModel(profile, h)(r)


def path_gain(r: float | np.ndarray, h: float, alpha: float) -> np.ndarray:
    if h <= 0:
        raise ValueError("h must be > 0")
    r = np.asarray(r, dtype=float)
    return (r * r + h * h) ** (-alpha / 2.0)


@dataclass(frozen=True)
class GainMixture:
    """Four-point distribution of the device-times-UAV antenna gain."""

    gains: tuple[float, float, float, float]
    probabilities: tuple[float, float, float, float]

    @classmethod
    def from_antenna(cls, antenna: AntennaConfig) -> "GainMixture":
        c_d, c_u = antenna.c_d, antenna.c_u
        return cls(
            gains=(
                antenna.G_dM * antenna.G_uM,
                antenna.G_dM * antenna.G_um,
                antenna.G_dm * antenna.G_uM,
                antenna.G_dm * antenna.G_um,
            ),
            probabilities=(
                c_d * c_u,
                c_d * (1.0 - c_u),
                (1.0 - c_d) * c_u,
                (1.0 - c_d) * (1.0 - c_u),
            ),
        )

    @property
    def main_gain(self) -> float:
        return self.gains[0]

    def support(self) -> list[tuple[float, float]]:
        """(gain, probability) pairs with nonzero probability."""
        return [(g, p) for g, p in zip(self.gains, self.probabilities) if p > 0]


def sample_nakagami_power(rng: np.random.Generator, m: int, size: int | tuple[int, ...] | None = None) -> np.ndarray:
    """Unit-mean Gamma(m, 1/m) power gains."""
    if m < 1:
        raise ValueError("Nakagami shape m must be >= 1")
    return rng.gamma(shape=m, scale=1.0 / m, size=size)


def sample_interferer_gain(
    rng: np.random.Generator, mix: GainMixture, size: int | tuple[int, ...] | None = None
) -> np.ndarray:
    probs = np.asarray(mix.probabilities, dtype=float)
    index = rng.choice(4, size=size, p=probs / probs.sum())
    return np.asarray(mix.gains, dtype=float)[index]
