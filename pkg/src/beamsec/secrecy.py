"""Secrecy capacities, absolute and instantaneous secrecy rates, leakage probability."""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .adversary import AttackerKind, EveNode, eve_snr_matrix
from .channel import ArraySpec, ChannelStatModel, NoiseSpec, derive_seed, sample_ensemble
from .codebook import Beam
from .scenario import PathSet, Point2D


def capacity(snr):
    """Shannon capacity log2(1 + snr) in bits/s/Hz."""
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ValueError("SNR must be >= 0")
    out = np.log2(1.0 + snr)
    return float(out) if out.ndim == 0 else out


def _fractions(T) -> np.ndarray:
    return np.asarray(getattr(T, "fractions", T), dtype=float)


def per_path_secrecy(c_bob, eve_capacities, axis: int = 0):
    """[C_b - max over sampled realizations of C_e]^+.

    `eve_capacities` holds the sampled Eve capacities along `axis`.
    """
    worst = np.max(np.asarray(eve_capacities, dtype=float), axis=axis)
    out = np.maximum(np.asarray(c_bob, dtype=float) - worst, 0.0)
    return float(out) if out.ndim == 0 else out


def location_rates(T, csl) -> np.ndarray:
    """Per-row time-averaged secrecy rate sum_l T_l csl[:, l].

    Accumulated column by column so a row's value is bit-identical no matter which
    other rows share the call.
    """
    csl = np.asarray(csl, dtype=float)
    T = _fractions(T)
    out = np.zeros(csl.shape[:-1])
    for l in range(csl.shape[-1]):
        out = out + csl[..., l] * T[l]
    return out


def absolute_secrecy_rate(T, csl) -> float:
    """Worst location of the time-averaged per-path secrecy capacities."""
    return float(np.min(location_rates(T, csl)))


def instantaneous_secrecy(T, c_bob, eve_capacities):
    """min over locations of sum_l T_l [C_b,l - C_e,l]^+ for actual realizations.

    `eve_capacities` has shape (..., n_locations, L); leading axes index trials.
    """
    gap = np.maximum(np.asarray(c_bob, dtype=float) - np.asarray(eve_capacities, dtype=float), 0.0)
    out = np.min(location_rates(T, gap), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def rate_grid(upper: float, step: float = 0.01) -> np.ndarray:
    """R_s grid 0, step, ... reaching at least `upper` + step."""
    n = int(np.ceil(max(upper, 0.0) / step)) + 2
    return np.round(np.arange(n) * step, 10)


def leakage_curve(rates, inst_secrecy) -> np.ndarray:
    """P_leak(R) = fraction of trials with C_s <= R, for every R in `rates`.

    Computed from integer counts over sorted samples, so the result does not depend
    on trial order.
    """
    samples = np.sort(np.asarray(inst_secrecy, dtype=float).ravel())
    counts = np.searchsorted(samples, np.asarray(rates, dtype=float), side="right")
    return counts / len(samples)


def zero_leakage_rate(rates, probabilities) -> float:
    """Largest grid rate with P_leak = 0 (the empirical absolute secrecy rate); 0 if none."""
    rates = np.asarray(rates)
    zero = np.nonzero(np.asarray(probabilities) == 0)[0]
    return float(rates[zero[-1]]) if len(zero) else 0.0


@dataclass(frozen=True, eq=False)
class EveEnsemble:
    """Candidate Eve locations with their traced paths and channel randomization law."""

    locations: tuple[Point2D, ...]
    paths: tuple[PathSet, ...]
    nodes: tuple[EveNode, ...]
    stat_model: ChannelStatModel
    tx_array: ArraySpec
    samples_per_location: int = 200

    def __post_init__(self):
        if self.samples_per_location < 1:
            raise ValueError("samples_per_location must be >= 1")
        if not (len(self.locations) == len(self.paths) == len(self.nodes)):
            raise ValueError("locations, paths and nodes must align")

    def __len__(self):
        return len(self.locations)

    def draw(self, index: int, n: int, seed: int) -> np.ndarray:
        """`n` channel realizations Alice -> Eve at location `index`, (n, N_e, N_a)."""
        return sample_ensemble(self.paths[index], self.stat_model, derive_seed(seed, index), n,
                               self.tx_array, self.nodes[index].array)

    def eve_snr(self, index: int, beams: Sequence[Beam], kind: AttackerKind, noise: NoiseSpec,
                n: int, seed: int) -> np.ndarray:
        return eve_snr_matrix(self.draw(index, n, seed), beams, self.nodes[index], kind, noise)

    def capacities(self, beams: Sequence[Beam], kind: AttackerKind, noise: NoiseSpec, seed: int,
                   n: Optional[int] = None, threads: int = 1) -> np.ndarray:
        """Eve capacities for every draw, location and beam: shape (n, n_locations, L)."""
        n = self.samples_per_location if n is None else n

        def one(i):
            return capacity(self.eve_snr(i, beams, kind, noise, n, seed))

        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                per_loc = list(pool.map(one, range(len(self))))
        else:
            per_loc = [one(i) for i in range(len(self))]
        return np.stack(per_loc, axis=1)

    def digest(self, seed: int, n: Optional[int] = None) -> str:
        """SHA-256 over the raw realizations, used to prove schemes shared draws."""
        n = self.samples_per_location if n is None else n
        h = hashlib.sha256()
        for i in range(len(self)):
            h.update(np.ascontiguousarray(self.draw(i, n, seed)).tobytes())
        return h.hexdigest()


def leakage_probability(rate: float, ensemble: EveEnsemble, T, c_bob, beams: Sequence[Beam],
                        kind: AttackerKind, noise: NoiseSpec, trials: int, seed: int) -> float:
    """Monte-Carlo P{C_s <= rate} with one joint draw over all locations per trial."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    caps = ensemble.capacities(beams, kind, noise, seed, n=trials)
    return float(leakage_curve([rate], instantaneous_secrecy(T, c_bob, caps))[0])


@dataclass(frozen=True, eq=False)
class SecrecyReport:
    fractions: np.ndarray
    bob_capacities: np.ndarray  # per path
    csl: np.ndarray  # (n_locations, L)
    location_rates: np.ndarray
    absolute_rate: float
    mean_rate: float
    leakage_rates: np.ndarray
    leakage: np.ndarray

    @classmethod
    def build(cls, T, c_bob, csl, inst_secrecy, rate_step: float = 0.01) -> "SecrecyReport":
        T = _fractions(T)
        per_loc = location_rates(T, csl)
        rates = rate_grid(float(T @ np.asarray(c_bob)), rate_step)
        return cls(T, np.asarray(c_bob, dtype=float), np.asarray(csl, dtype=float), per_loc,
                   float(per_loc.min()), float(per_loc.mean()), rates,
                   leakage_curve(rates, inst_secrecy))
