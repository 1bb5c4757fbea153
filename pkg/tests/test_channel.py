import math

import numpy as np
import pytest

from uplink_analysis.channel import (
    GainMixture,
    LosModel,
    path_gain,
    p_los,
    sample_interferer_gain,
    sample_nakagami_power,
)
from uplink_analysis.config import AntennaConfig, environment_profile


def test_los_probability_overhead_is_one_in_suburban():
    model = LosModel(environment_profile("suburban"), 30.0)
    expected = 1.0 / (1.0 + 4.88 * math.exp(-0.429 * (90.0 - 4.88)))
    assert model.at(0.0) == pytest.approx(expected, abs=1e-15)
    assert model.at(0.0) == pytest.approx(1.0, abs=1e-8)


def test_los_probability_decreases_with_distance():
    r = np.linspace(0.0, 2000.0, 50)
    values = p_los(environment_profile("high-rise"), 30.0, r)
    assert np.all(np.diff(values) <= 0)
    assert np.all((values > 0) & (values <= 1))


def test_los_and_nlos_sum_to_one():
    model = LosModel(environment_profile("dense-urban"), 100.0)
    for r in (0.0, 50.0, 500.0, 5000.0):
        assert model.at(r) + model.nlos_at(r) == pytest.approx(1.0, abs=1e-15)
        assert model(np.array([r]))[0] == pytest.approx(model.at(r))


def test_path_gain():
    assert path_gain(0.0, 10.0, 2.0) == pytest.approx(1e-2)
    assert path_gain(30.0, 40.0, 4.0) == pytest.approx(50.0**-4)
    with pytest.raises(ValueError):
        path_gain(1.0, 0.0, 2.5)


def test_nakagami_moments():
    rng = np.random.default_rng(1)
    exp_draws = sample_nakagami_power(rng, 1, 1_000_000)
    assert exp_draws.mean() == pytest.approx(1.0, abs=0.005)
    gamma_draws = sample_nakagami_power(rng, 3, 1_000_000)
    assert gamma_draws.var() == pytest.approx(1.0 / 3.0, abs=0.01)
    with pytest.raises(ValueError):
        sample_nakagami_power(rng, 0, 10)


def test_gain_mixture_probabilities():
    mix = GainMixture.from_antenna(AntennaConfig())
    assert sum(mix.probabilities) == pytest.approx(1.0)
    assert mix.probabilities[0] == pytest.approx(1.0 / 81.0)
    assert mix.main_gain == pytest.approx(10.0)


def test_interferer_gain_sampling_frequency():
    mix = GainMixture.from_antenna(AntennaConfig())
    draws = sample_interferer_gain(np.random.default_rng(2), mix, 1_000_000)
    n = len(draws)
    p = 1.0 / 81.0
    observed = np.mean(draws == mix.main_gain)
    assert abs(observed - p) <= 3.0 * math.sqrt(p * (1 - p) / n)


def test_omnidirectional_antenna_has_single_support_point():
    antenna = AntennaConfig(G_dM=1.0, G_uM=1.0, theta_d=2 * math.pi, theta_u=2 * math.pi)
    support = GainMixture.from_antenna(antenna).support()
    assert support == [(1.0, 1.0)]
