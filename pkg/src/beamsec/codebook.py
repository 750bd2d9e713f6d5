"""Beam codebooks, exhaustive sector sweep, per-pair gain tuning and Bob's SNR."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .channel import ArraySpec, NoiseSpec, steering


@dataclass(frozen=True, eq=False)
class Beam:
    weights: np.ndarray
    steer_angle: float
    backoff: float = 0.0  # dB of transmit power reduction

    def __post_init__(self):
        norm2 = float(np.vdot(self.weights, self.weights).real)
        if abs(norm2 - 1.0) > 1e-12:
            raise ValueError(f"beam weights must be unit norm, got |w|^2={norm2}")
        if self.backoff < 0:
            raise ValueError("backoff must be >= 0 dB")

    def with_backoff(self, backoff: float) -> "Beam":
        return replace(self, backoff=backoff)


@dataclass(frozen=True, eq=False)
class Codebook:
    beams: tuple[Beam, ...]
    array: ArraySpec

    def __post_init__(self):
        object.__setattr__(self, "beams", tuple(self.beams))
        if not self.beams:
            raise ValueError("codebook must not be empty")
        angles = [b.steer_angle for b in self.beams]
        if any(b <= a for a, b in zip(angles, angles[1:])):
            raise ValueError("codebook steer angles must be strictly increasing")

    def __len__(self):
        return len(self.beams)

    def __getitem__(self, i) -> Beam:
        return self.beams[i]

    @property
    def angles(self) -> np.ndarray:
        return np.array([b.steer_angle for b in self.beams])

    @property
    def matrix(self) -> np.ndarray:
        """Weights stacked column-wise, shape (N, |codebook|)."""
        return np.stack([b.weights for b in self.beams], axis=1)


@dataclass(frozen=True, eq=False)
class AngularChannelProfile:
    magnitude: np.ndarray  # (|W|, |F|)
    tx_angles: np.ndarray
    rx_angles: np.ndarray

    def __post_init__(self):
        if self.magnitude.shape != (len(self.tx_angles), len(self.rx_angles)):
            raise ValueError("profile shape does not match the angle grids")
        if np.any(self.magnitude < 0):
            raise ValueError("profile magnitudes must be >= 0")


@dataclass(frozen=True, eq=False)
class BeamPair:
    tx_index: int
    rx_index: int
    tx_beam: Beam
    rx_beam: Beam
    magnitude: float  # untuned |f^H H w|

    @property
    def backoff(self) -> float:
        return self.tx_beam.backoff

    @property
    def tuned_magnitude(self) -> float:
        return self.magnitude * 10 ** (-self.backoff / 20)


def make_codebook(array: ArraySpec, n_beams: int, span: float = 90.0,
                  center: float = 90.0) -> Codebook:
    """`n_beams` matched-steering beams spread uniformly over `span` degrees around `center`."""
    if n_beams < 1:
        raise ValueError("n_beams must be >= 1")
    if n_beams == 1:
        angles = np.array([center], dtype=float)
    else:
        angles = np.linspace(center - span / 2, center + span / 2, n_beams)
    scale = 1 / math.sqrt(array.n_elements)
    beams = tuple(Beam(steering(array, a) * scale, float(a)) for a in angles)
    return Codebook(beams, array)


def beam_train(H: np.ndarray, W: Codebook, F: Codebook) -> AngularChannelProfile:
    """Exhaustive TX x RX sweep: magnitude[l, l'] = |f_l'^H H w_l|."""
    H = np.asarray(H)
    if H.shape != (F.array.n_elements, W.array.n_elements):
        raise ValueError(
            f"channel shape {H.shape} incompatible with codebooks "
            f"({F.array.n_elements} rx, {W.array.n_elements} tx)")
    mag = np.abs(F.matrix.conj().T @ H @ W.matrix).T
    return AngularChannelProfile(mag, W.angles, F.angles)


def best_rx_per_tx(acp: AngularChannelProfile) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lower RX index
    return np.argmax(acp.magnitude, axis=1)


def tune_gain(magnitude: float, tau_acp: float, step: float = 1.0,
              max_backoff: float = 15.0) -> tuple[float, bool]:
    """Largest backoff on the step grid keeping the tuned magnitude >= tau_acp.

    Returns (backoff_db, decodable). Undecodable pairs get backoff 0.
    """
    if magnitude < 0:
        raise ValueError("magnitude must be >= 0")
    if magnitude < tau_acp or magnitude == 0:
        return 0.0, False
    n_max = int(math.floor(max_backoff / step + 1e-12))
    headroom = 20 * math.log10(magnitude / tau_acp)
    k = min(n_max, int(math.floor(headroom / step + 1e-12)))
    while k > 0 and magnitude * 10 ** (-k * step / 20) < tau_acp:
        k -= 1
    return k * step, True


def tau_from_threshold(decode_snr: float, noise: NoiseSpec, margin_db: float = 10.0) -> float:
    """ACP magnitude threshold `margin_db` above the magnitude giving SNR `decode_snr` (linear)."""
    return math.sqrt(decode_snr * noise.power / noise.tx_power) * 10 ** (margin_db / 20)


def effective_power(noise: NoiseSpec, backoff) -> np.ndarray:
    return noise.tx_power * 10 ** (-np.asarray(backoff, dtype=float) / 10)


def snr_bob(H_b: np.ndarray, pair: BeamPair, noise: NoiseSpec) -> float:
    gain = np.vdot(pair.rx_beam.weights, H_b @ pair.tx_beam.weights)
    return float(effective_power(noise, pair.backoff) * abs(gain) ** 2 / noise.power)


def make_pair(W: Codebook, F: Codebook, acp: AngularChannelProfile, tx_index: int,
              rx_index: int, backoff: float = 0.0) -> BeamPair:
    return BeamPair(
        tx_index=int(tx_index),
        rx_index=int(rx_index),
        tx_beam=W[tx_index].with_backoff(backoff),
        rx_beam=F[rx_index],
        magnitude=float(acp.magnitude[tx_index, rx_index]),
    )


def tune_profile(acp: AngularChannelProfile, tau_acp: float, step: float = 1.0,
                 max_backoff: float = 15.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tune every TX beam against its best RX beam.

    Returns (best_rx, backoff_db, decodable) arrays indexed by TX beam.
    """
    best = best_rx_per_tx(acp)
    backoff = np.zeros(len(best))
    ok = np.zeros(len(best), dtype=bool)
    for l, lp in enumerate(best):
        backoff[l], ok[l] = tune_gain(float(acp.magnitude[l, lp]), tau_acp, step, max_backoff)
    return best, backoff, ok


def tuned_profile(acp: AngularChannelProfile, backoff: Sequence[float]) -> AngularChannelProfile:
    """Profile after applying each TX beam's power backoff to its whole row."""
    # scalar pow keeps the tuned values bit-identical to tune_gain's own check
    scale = np.array([10 ** (-float(b) / 20) for b in backoff])
    return AngularChannelProfile(acp.magnitude * scale[:, None], acp.tx_angles, acp.rx_angles)
