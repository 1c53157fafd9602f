import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfcqed.fitting import blob_fit
from hfcqed.readout import (
    CHUNK,
    ReadoutScenario,
    angular_histogram,
    assignment_errors,
    efficiency,
    iq_angle,
    optimal_threshold,
    repeated_measurement,
    scenario_from_theory,
    simulate_shots,
    snr_empirical,
    snr_theory,
)
from hfcqed.shots import BlobModel, ShotSet, read_shots_csv, write_shots_csv


def base_scenario(**kw):
    return scenario_from_theory(0.08, 11.28e6, 14, 2.5e-6, 1.0, seed=7, **kw)


def test_snr_theory_and_bounds():
    assert snr_theory(0.5, 1.0 / (2 * math.pi), 1.0, 1.0, math.pi) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        snr_theory(0.6, 1e6, 1, 1e-6, 1.0)


def test_snr_empirical():
    assert snr_empirical(BlobModel(0j, 2 + 0j, 1.0)) == pytest.approx(2.0)


def test_efficiency_round_trip_noiseless():
    sc = base_scenario()
    eff = efficiency(sc.blob, 11.28e6, 14, 2.5e-6, 20.92e9)
    assert eff.eta == pytest.approx(0.08, rel=1e-12)
    assert eff.theta_eg == pytest.approx(1.0, rel=1e-12)
    assert not eff.unphysical


def test_efficiency_flags_unphysical():
    blob = BlobModel(-10 + 0j, 10 + 0j, 0.1)
    assert efficiency(blob, 1e6, 1.0, 1e-6, 7e9).unphysical


def test_iq_angle_range():
    a = iq_angle(np.exp(1j * np.linspace(-10, 10, 101)))
    assert np.all(a >= -math.pi) and np.all(a < math.pi)
    assert iq_angle(-1 + 0j) == pytest.approx(0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(16, 720), st.integers(0, 2**32 - 1))
def test_histogram_conserves_counts(bins, seed):
    rng = np.random.default_rng(seed)
    shots = ShotSet(rng.standard_normal(500) + 1j * rng.standard_normal(500))
    assert angular_histogram(shots, "mean", bins).total == 500


@settings(max_examples=30, deadline=None)
@given(st.integers(-180, 179), st.integers(0, 2**32 - 1))
def test_histogram_rotation_equivariance(k, seed):
    # Rotating shots by an integer number of bins rolls the histogram.
    rng = np.random.default_rng(seed)
    shots = ShotSet(np.exp(1j * (rng.uniform(-math.pi, math.pi, 400) // (math.pi / 180) + 0.5) * math.pi / 180))
    h0 = angular_histogram(shots, bins=360)
    h1 = angular_histogram(shots.rotated(k * math.pi / 180), bins=360)
    np.testing.assert_array_equal(np.roll(h0.counts, k), h1.counts)


def test_histogram_rejects_few_bins():
    with pytest.raises(ValueError):
        angular_histogram(ShotSet(np.ones(3)), bins=8)


def test_assignment_errors_and_threshold():
    edges = np.linspace(-math.pi, math.pi, 17)
    from hfcqed.readout import AngularHistogram

    hg = AngularHistogram(edges, np.r_[np.full(8, 10), np.zeros(7), [1]].astype(int))
    he = AngularHistogram(edges, np.r_[[2], np.zeros(7), np.full(8, 10)].astype(int))
    r = assignment_errors(hg, he, 0.0)
    assert r.p_notg_given_g == pytest.approx(1 / 81)
    assert r.p_g_given_notg == pytest.approx(2 / 82)
    assert optimal_threshold(hg, he).epsilon_assignment <= r.epsilon_assignment
    with pytest.raises(ValueError):
        assignment_errors(hg, he, 4.0)


def test_simulation_deterministic_and_parallel_invariant():
    sc = base_scenario().with_populations({"g": 0.5, "e": 0.5})
    n = 2 * CHUNK + 123
    a = simulate_shots(sc, n)
    b = simulate_shots(sc, n, workers=4)
    np.testing.assert_array_equal(a.iq, b.iq)
    c = simulate_shots(sc, n, stream=3)
    assert not np.array_equal(a.iq, c.iq)


def test_whole_chunks_are_prefix_stable():
    sc = base_scenario()
    np.testing.assert_array_equal(simulate_shots(sc, CHUNK).iq, simulate_shots(sc, CHUNK + 10).iq[:CHUNK])


def test_simulated_blobs_recover_geometry():
    sc = base_scenario().with_populations({"g": 0.5, "e": 0.5})
    fit = blob_fit(simulate_shots(sc, 100_000), n_components=2)
    ends = sorted(fit.means, key=lambda m: abs(m - sc.blob.mu_g))
    assert abs(ends[0] - sc.blob.mu_g) < 0.05
    assert abs(ends[1] - sc.blob.mu_e) < 0.05


def test_decay_moves_shots_toward_ground():
    sc = scenario_from_theory(0.08, 11.28e6, 14, 2.5e-6, 1.0, t1=2.5e-6, seed=1).with_populations({"e": 1.0})
    z = simulate_shots(sc, 20_000).iq
    d_e = np.abs(z - sc.blob.mu_e)
    assert np.mean(d_e > 3) > 0.3


def test_leakage_fraction():
    sc = base_scenario(leakage_fraction=0.1, leakage_center=50 + 0j)
    z = simulate_shots(sc, 50_000).iq
    assert np.mean(np.abs(z - 50) < 5) == pytest.approx(0.1, abs=0.01)


def test_repeated_measurement_heralds_ground():
    sc = base_scenario(leakage_fraction=0.05, leakage_center=50 + 0j).with_populations({"g": 0.9, "e": 0.1})
    rm = repeated_measurement(sc, 20_000)
    assert len(rm.second) == 20_000
    assert 0 < rm.acceptance < 1
    assert np.mean(np.abs(rm.second.iq - 50) < 5) == pytest.approx(0.05, abs=0.01)


def test_scenario_validation():
    blob = BlobModel(0j, 1 + 0j, 0.1)
    with pytest.raises(ValueError):
        ReadoutScenario(blob, 1e-5, 1e-6, populations={"g": 0.7, "e": 0.7})
    with pytest.raises(ValueError):
        ReadoutScenario(blob, 1e-5, 1e-6, populations={"f": 0.1})


def test_shots_csv_round_trip(tmp_path):
    sc = base_scenario()
    s = simulate_shots(sc, 300, label="g")
    write_shots_csv(tmp_path / "s.csv", [s])
    back = read_shots_csv(tmp_path / "s.csv")["g"]
    np.testing.assert_array_equal(back.iq, s.iq)
