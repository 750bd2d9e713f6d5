import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamsec.channel import ArraySpec, NoiseSpec, assemble, steering
from beamsec.codebook import (AngularChannelProfile, Beam, BeamPair, Codebook, beam_train,
                              best_rx_per_tx, make_codebook, make_pair, snr_bob, tau_from_threshold,
                              tune_gain, tune_profile, tuned_profile)
from beamsec.scenario import PathComponent, PathSet, Point2D


def single_path(gain, aod, aoa):
    return PathSet((PathComponent(gain, aod, aoa, 1.0, 0),), Point2D(0, 0), Point2D(1, 0))


def test_make_codebook_examples():
    cb = make_codebook(ArraySpec(8), 1, 90.0)
    assert cb.angles.tolist() == [90.0]
    assert np.allclose(cb[0].weights, np.full(8, 1 / math.sqrt(8)))
    cb = make_codebook(ArraySpec(16), 17, 90.0)
    assert np.allclose(cb.angles, 45.0 + 5.625 * np.arange(17))
    for b in cb.beams:
        assert np.vdot(b.weights, b.weights).real == pytest.approx(1.0, abs=1e-12)
    assert cb.matrix.shape == (16, 17)


def test_beam_and_codebook_invariants():
    with pytest.raises(ValueError):
        Beam(np.ones(4, complex), 90.0)
    w = np.ones(4, complex) / 2
    with pytest.raises(ValueError):
        Beam(w, 90.0, backoff=-1)
    with pytest.raises(ValueError):
        Codebook((Beam(w, 90.0), Beam(w, 90.0)), ArraySpec(4))
    with pytest.raises(ValueError):
        Codebook((), ArraySpec(4))
    with pytest.raises(ValueError):
        make_codebook(ArraySpec(4), 0)


def test_beam_train_examples():
    W, F = make_codebook(ArraySpec(8), 9), make_codebook(ArraySpec(4), 5)
    assert np.array_equal(beam_train(np.zeros((4, 8)), W, F).magnitude, np.zeros((9, 5)))
    H = assemble(single_path(1.0, W.angles[3], F.angles[1]), ArraySpec(8), ArraySpec(4))
    acp = beam_train(H, W, F)
    assert acp.magnitude[3, 1] == pytest.approx(math.sqrt(32))
    assert acp.magnitude.max() == acp.magnitude[3, 1]
    rotated = beam_train(H * np.exp(0.7j), W, F)
    assert np.allclose(rotated.magnitude, acp.magnitude, atol=1e-12)
    with pytest.raises(ValueError):
        beam_train(np.zeros((8, 4)), W, F)


def test_beam_train_matches_loop_oracle(rng):
    W, F = make_codebook(ArraySpec(6), 7), make_codebook(ArraySpec(5), 4)
    H = rng.normal(size=(5, 6)) + 1j * rng.normal(size=(5, 6))
    acp = beam_train(H, W, F)
    for l, w in enumerate(W.beams):
        for lp, f in enumerate(F.beams):
            assert acp.magnitude[l, lp] == pytest.approx(abs(np.conj(f.weights) @ H @ w.weights))


def test_best_rx_per_tx():
    acp = AngularChannelProfile(np.array([[0.1, 0.9, 0.3], [0.5, 0.5, 0.1]]), np.array([0.0, 1.0]),
                                np.array([0.0, 1.0, 2.0]))
    assert best_rx_per_tx(acp).tolist() == [1, 0]
    single = AngularChannelProfile(np.array([[0.2], [0.7]]), np.array([0.0, 1.0]), np.array([0.0]))
    assert best_rx_per_tx(single).tolist() == [0, 0]


def test_tune_gain_examples():
    assert tune_gain(0.5, 0.5) == (0.0, True)
    assert tune_gain(10.0, 1.0, 1.0, 15.0) == (15.0, True)
    assert tune_gain(2.0, 1.0, 1.0, 15.0) == (6.0, True)
    assert tune_gain(0.4, 0.5) == (0.0, False)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 1e3), st.floats(1e-6, 1e3), st.sampled_from([0.5, 1.0, 2.0]))
def test_tune_gain_is_largest_feasible_step(mag, tau, step):
    backoff, ok = tune_gain(mag, tau, step, 15.0)
    if not ok:
        assert mag < tau and backoff == 0
        return
    assert mag * 10 ** (-backoff / 20) >= tau
    nxt = backoff + step
    assert nxt > 15.0 + 1e-9 or mag * 10 ** (-nxt / 20) < tau


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_tune_gain_monotone(a, b):
    lo, hi = sorted((a, b))
    assert tune_gain(lo, 1.0)[0] <= tune_gain(hi, 1.0)[0]


def test_tuned_profile_consistent_with_tune_gain():
    mag = np.array([[3.0, 1.0], [0.9, 0.2], [12.0, 11.0]])
    acp = AngularChannelProfile(mag, np.arange(3.0), np.arange(2.0))
    best, backoff, ok = tune_profile(acp, 1.0)
    assert best.tolist() == [0, 0, 0]
    assert ok.tolist() == [True, False, True]
    tuned = tuned_profile(acp, backoff).magnitude
    for l in range(3):
        if ok[l]:
            assert tuned[l, best[l]] >= 1.0


def _matched_pair(Na, Nb, aod, aoa, alpha, backoff=0.0):
    tx, rx = ArraySpec(Na), ArraySpec(Nb)
    w = Beam(steering(tx, aod) / math.sqrt(Na), aod, backoff)
    f = Beam(steering(rx, aoa) / math.sqrt(Nb), aoa)
    H = assemble(single_path(alpha, aod, aoa), tx, rx)
    return H, BeamPair(0, 0, w, f, abs(np.vdot(f.weights, H @ w.weights)))


def test_snr_bob_examples():
    noise = NoiseSpec(power=2e-9, tx_power=0.5)
    H, pair = _matched_pair(8, 4, 70.0, 110.0, 1e-3)
    expected = 0.5 * 8 * 4 * 1e-6 / 2e-9
    assert snr_bob(H, pair, noise) == pytest.approx(expected, rel=1e-12)
    # |f^H H w|^2 = sigma^2 / P gives unit SNR
    g = math.sqrt(noise.power / noise.tx_power)
    w = Beam(np.array([1.0 + 0j]), 90.0)
    assert snr_bob(np.array([[g]]), BeamPair(0, 0, w, w, g), noise) == pytest.approx(1.0)
    H, p3 = _matched_pair(8, 4, 70.0, 110.0, 1e-3, backoff=3.0)
    assert snr_bob(H, p3, noise) / snr_bob(H, pair, noise) == pytest.approx(10 ** -0.3, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 30))
def test_snr_bob_backoff_scaling(b):
    noise = NoiseSpec(1e-9, 0.1)
    H, p0 = _matched_pair(4, 4, 60.0, 100.0, 1e-3)
    _, pb = _matched_pair(4, 4, 60.0, 100.0, 1e-3, backoff=b)
    assert snr_bob(H, pb, noise) == pytest.approx(snr_bob(H, p0, noise) * 10 ** (-b / 10), rel=1e-13)


def test_tau_from_threshold():
    noise = NoiseSpec(1e-10, 0.1)
    tau = tau_from_threshold(4.0, noise, margin_db=0.0)
    assert noise.tx_power * tau ** 2 / noise.power == pytest.approx(4.0)
    assert tau_from_threshold(4.0, noise, 10.0) == pytest.approx(tau * 10 ** 0.5)


def test_make_pair_carries_backoff():
    W, F = make_codebook(ArraySpec(4), 3), make_codebook(ArraySpec(4), 3)
    acp = AngularChannelProfile(np.full((3, 3), 2.0), W.angles, F.angles)
    p = make_pair(W, F, acp, 1, 2, 6.0)
    assert (p.tx_index, p.rx_index, p.backoff) == (1, 2, 6.0)
    assert p.tuned_magnitude == pytest.approx(2.0 * 10 ** (-0.3))
