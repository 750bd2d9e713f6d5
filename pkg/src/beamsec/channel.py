"""ULA steering vectors, geometric channel matrices and seeded channel ensembles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .scenario import PathSet


@dataclass(frozen=True)
class ArraySpec:
    n_elements: int
    spacing_over_lambda: float = 0.5
    boresight: float = 90.0  # global bearing of broadside, degrees

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError(f"n_elements must be >= 1, got {self.n_elements}")
        if not self.spacing_over_lambda > 0:
            raise ValueError(f"spacing_over_lambda must be > 0, got {self.spacing_over_lambda}")

    def local_angle(self, bearing):
        """Map a global bearing to the array angle measured from the array axis (90 = broadside)."""
        return np.asarray(bearing, dtype=float) - self.boresight + 90.0


@dataclass(frozen=True)
class ChannelStatModel:
    gain_sigma: float = 0.0  # dB
    angle_sigma: float = 0.0  # degrees
    random_phase: bool = True
    angle_truncation: float = 2.0  # in units of angle_sigma

    def __post_init__(self):
        if self.gain_sigma < 0 or self.angle_sigma < 0:
            raise ValueError("standard deviations must be >= 0")
        if self.angle_truncation <= 0:
            raise ValueError("angle_truncation must be > 0")


@dataclass(frozen=True)
class NoiseSpec:
    power: float  # sigma_eta^2, linear
    tx_power: float  # P, linear

    def __post_init__(self):
        if not (self.power > 0 and self.tx_power > 0):
            raise ValueError("noise power and tx power must both be > 0")

    @classmethod
    def from_dbm(cls, noise_dbm: float, tx_power_dbm: float) -> "NoiseSpec":
        return cls(power=10 ** (noise_dbm / 10) * 1e-3, tx_power=10 ** (tx_power_dbm / 10) * 1e-3)


def steering(array: ArraySpec, theta) -> np.ndarray:
    """Unnormalized ULA response at array angle `theta` (degrees).

    Scalar theta gives shape (N,); an array of angles gives shape (..., N).
    """
    theta = np.asarray(theta, dtype=float)
    n = np.arange(array.n_elements)
    phase = -2j * np.pi * array.spacing_over_lambda * np.cos(np.deg2rad(theta))[..., None] * n
    return np.exp(phase)


def _assemble(gains, aods, aoas, tx_array: ArraySpec, rx_array: ArraySpec) -> np.ndarray:
    # gains/aods/aoas: (..., L) -> H: (..., N_rx, N_tx)
    a_tx = steering(tx_array, tx_array.local_angle(aods))
    a_rx = steering(rx_array, rx_array.local_angle(aoas))
    return np.einsum("...l,...lr,...lt->...rt", gains, a_rx, a_tx.conj())


def assemble(paths: PathSet, tx_array: ArraySpec, rx_array: ArraySpec) -> np.ndarray:
    """Sum of rank-one path contributions alpha * a_rx(phi) a_tx(theta)^H."""
    if len(paths) == 0:
        return np.zeros((rx_array.n_elements, tx_array.n_elements), dtype=complex)
    return _assemble(paths.gains, paths.aods, paths.aoas, tx_array, rx_array)


def _truncated_normal(rng: np.random.Generator, sigma: float, bound: float, size) -> np.ndarray:
    if sigma == 0:
        return np.zeros(size)
    return stats.truncnorm.rvs(-bound, bound, loc=0.0, scale=sigma, size=size, random_state=rng)


def sample_ensemble(paths: PathSet, model: ChannelStatModel, seed, n_samples: int,
                    tx_array: ArraySpec, rx_array: ArraySpec) -> np.ndarray:
    """Draw `n_samples` jittered channel matrices around the traced geometry.

    Per path and per draw: log-normal amplitude (zero-mean in dB), optionally a
    uniformly redrawn phase, and truncated-Gaussian AoD/AoA jitter. Returns an
    array of shape (n_samples, N_rx, N_tx).
    """
    rng = np.random.default_rng(seed)
    n_paths = len(paths)
    shape = (n_samples, n_paths)
    if n_paths == 0:
        return np.zeros((n_samples, rx_array.n_elements, tx_array.n_elements), dtype=complex)
    gains = np.broadcast_to(paths.gains, shape)
    amp_db = rng.normal(0.0, model.gain_sigma, size=shape) if model.gain_sigma > 0 else np.zeros(shape)
    if model.random_phase:
        phase = np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=shape))
        jittered = np.abs(gains) * 10 ** (amp_db / 20) * phase
    else:
        jittered = gains * 10 ** (amp_db / 20)
    aods = paths.aods + _truncated_normal(rng, model.angle_sigma, model.angle_truncation, shape)
    aoas = paths.aoas + _truncated_normal(rng, model.angle_sigma, model.angle_truncation, shape)
    return _assemble(jittered, aods, aoas, tx_array, rx_array)


def sample_realization(paths: PathSet, model: ChannelStatModel, seed,
                       tx_array: ArraySpec, rx_array: ArraySpec) -> np.ndarray:
    return sample_ensemble(paths, model, seed, 1, tx_array, rx_array)[0]


def derive_seed(root: int, *keys: int) -> int:
    """Child seed for stream `keys` under `root`.

    Splitting rule: SeedSequence(entropy=root, spawn_key=keys), first 64-bit word.
    Depends only on (root, keys), so results do not depend on task scheduling.
    """
    ss = np.random.SeedSequence(entropy=int(root), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
