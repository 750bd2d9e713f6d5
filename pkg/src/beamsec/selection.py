"""Angular-profile clustering and selection of decodable, diverse beam pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codebook import (AngularChannelProfile, BeamPair, Codebook, make_pair,
                       tune_profile, tuned_profile)


class NoSecureBeamsError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProfilePoint:
    aod: float
    aoa: float
    power: float  # dB, tuned magnitude squared
    tx_index: int = -1
    rx_index: int = -1

    def __post_init__(self):
        if not math.isfinite(self.power):
            raise ValueError("profile point power must be finite")

    @property
    def weight(self) -> float:
        return 10 ** (self.power / 10)


@dataclass(frozen=True, eq=False)
class ClusterSet:
    labels: np.ndarray  # cluster id per point, same order as the input points
    centroids: np.ndarray  # (K, 2) of (aod, aoa)
    distortion: float
    history: tuple[float, ...] = ()  # weighted distortion after every assignment step
    iterations: int = 0

    @property
    def k(self) -> int:
        return len(self.centroids)


@dataclass(frozen=True, eq=False)
class SelectedPairs:
    pairs: tuple[BeamPair, ...]
    clusters: tuple[int, ...] = ()
    k: int = 0
    distortions: tuple[float, ...] = ()

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def check(self, tau_acp: float, min_sep: float) -> None:
        """Raise AssertionError if any selection invariant is violated."""
        assert len(set(self.clusters)) == len(self.clusters), "two pairs share a cluster"
        for p in self.pairs:
            assert p.tuned_magnitude >= tau_acp, f"pair {p.tx_index},{p.rx_index} not decodable"
        for i, a in enumerate(self.pairs):
            for b in self.pairs[i + 1:]:
                sep = abs(wrap(a.tx_beam.steer_angle - b.tx_beam.steer_angle))
                assert sep >= min_sep - 1e-9, f"AoD separation {sep} < {min_sep}"


def wrap(delta):
    """Wrap angle differences to [-180, 180)."""
    return (np.asarray(delta) + 180.0) % 360.0 - 180.0


def profile_points(acp: AngularChannelProfile, tau_acp: float) -> list[ProfilePoint]:
    """One point per (tuned) profile entry at or above the decode threshold."""
    pts = []
    for l, lp in zip(*np.nonzero(acp.magnitude >= tau_acp)):
        m = float(acp.magnitude[l, lp])
        pts.append(ProfilePoint(float(acp.tx_angles[l]), float(acp.rx_angles[lp]),
                                20 * math.log10(m), int(l), int(lp)))
    return pts


def _features(points: Sequence[ProfilePoint]) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([[p.aod, p.aoa] for p in points], dtype=float).reshape(-1, 2)
    # weights relative to the strongest point: clustering is scale-invariant, and
    # distortions stay in degrees^2 rather than in absolute received power
    db = np.array([p.power for p in points], dtype=float)
    w = 10 ** ((db - db.max()) / 10) if len(db) else db
    return x, w


def _sq_dist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    # (n, 2) x (k, 2) -> (n, k)
    d = wrap(x[:, None, :] - c[None, :, :])
    return np.sum(d * d, axis=-1)


def _seed_centroids(x, w, k, rng) -> np.ndarray:
    n = len(x)
    chosen = [int(rng.choice(n, p=w / w.sum()))]
    for _ in range(1, k):
        d2 = _sq_dist(x, x[chosen]).min(axis=1)
        score = w * d2
        score[chosen] = 0.0
        if score.sum() <= 0:
            score = w.copy()
            score[chosen] = 0.0
        chosen.append(int(rng.choice(n, p=score / score.sum())))
    return x[chosen].copy()


def _lloyd(x, w, k, rng, max_iter):
    centroids = _seed_centroids(x, w, k, rng)
    labels = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dist(x, centroids)
        new_labels = np.argmin(d2, axis=1)
        history.append(float(np.sum(w * d2[np.arange(len(x)), new_labels])))
        updated = centroids.copy()
        for j in range(k):
            members = new_labels == j
            if not members.any():
                continue
            unwrapped = centroids[j] + wrap(x[members] - centroids[j])
            updated[j] = np.average(unwrapped, axis=0, weights=w[members]) % 360.0
        moved = float(np.max(np.abs(wrap(updated - centroids))))
        converged = labels is not None and np.array_equal(labels, new_labels) and moved < 1e-12
        labels, centroids = new_labels, updated
        if converged:
            break
    d2 = _sq_dist(x, centroids)
    distortion = float(np.sum(w * d2[np.arange(len(x)), labels]))
    return ClusterSet(labels, centroids, distortion, tuple(history), it)


def kmeans(points: Sequence[ProfilePoint], k: int, seed: int, max_iter: int = 100,
           n_init: int = 10) -> ClusterSet:
    """Power-weighted Lloyd iterations on (aod, aoa) with angular wraparound.

    Centroids start from weighted k-means++ draws; the best of `n_init` seeded
    restarts is kept. Each update unwraps members to within 180 degrees of the old
    centroid before taking the weighted mean, so the weighted wrapped distortion
    never increases within a restart.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    if len(points) < k:
        raise ValueError(f"cannot form {k} clusters from {len(points)} points")
    x, w = _features(points)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        run = _lloyd(x, w, k, rng, max_iter)
        if best is None or run.distortion < best.distortion:
            best = run
    return best


def choose_k(points: Sequence[ProfilePoint], k_max: int, seed: int,
             max_iter: int = 100) -> tuple[int, list[float]]:
    """Pick K at the elbow: the largest second difference of log-distortion, K = 2..k_max-1.

    Distortion falls by orders of magnitude as clusters separate, so the elbow is
    taken on a log scale; a zero distortion is floored at 1e-12 of the K=1 value.
    """
    k_top = min(k_max, len(points))
    distortions = [kmeans(points, k, seed, max_iter).distortion for k in range(1, k_top + 1)]
    if distortions[0] <= 0:
        return 1, distortions
    if k_top <= 2:
        return k_top, distortions
    logd = np.log(np.maximum(distortions, distortions[0] * 1e-12))
    best_k, best = 2, -math.inf
    for k in range(2, k_top):
        second = logd[k - 2] - 2 * logd[k - 1] + logd[k]
        if second > best + 1e-12:
            best_k, best = k, second
    return best_k, distortions


def select_pairs(clusters: ClusterSet, points: Sequence[ProfilePoint], W: Codebook,
                 F: Codebook, acp: AngularChannelProfile, backoff: Sequence[float],
                 tau_acp: float, min_sep: float = 15.0) -> SelectedPairs:
    """Strongest decodable pair per cluster, greedily filtered by AoD separation.

    `acp` is the untuned profile and `backoff` the per-TX-beam tuning result.
    """
    backoff = np.asarray(backoff, dtype=float)
    tuned_mag = tuned_profile(acp, backoff).magnitude
    reps: list[tuple[float, int, int, int]] = []  # (-tuned, tx, rx, cluster)
    for cid in range(clusters.k):
        best = None
        for p, label in zip(points, clusters.labels):
            if label != cid:
                continue
            tuned = float(tuned_mag[p.tx_index, p.rx_index])
            if tuned < tau_acp:
                continue
            key = (-tuned, p.tx_index, p.rx_index, cid)
            if best is None or key < best:
                best = key
        if best is not None:
            reps.append(best)
    if not reps:
        raise NoSecureBeamsError("no decodable beam pair survived gain tuning")
    reps.sort()
    kept: list[tuple[float, int, int, int]] = []
    for rep in reps:
        aod = acp.tx_angles[rep[1]]
        if all(abs(wrap(aod - acp.tx_angles[k[1]])) >= min_sep for k in kept):
            kept.append(rep)
    pairs = tuple(make_pair(W, F, acp, tx, rx, float(backoff[tx])) for _, tx, rx, _ in kept)
    return SelectedPairs(pairs, tuple(c for *_, c in kept), clusters.k)


def select_beamsec_pairs(acp: AngularChannelProfile, W: Codebook, F: Codebook, tau_acp: float,
                         seed: int, step: float = 1.0, max_backoff: float = 15.0,
                         k_max: int = 8, min_sep: float = 15.0,
                         max_iter: int = 100) -> SelectedPairs:
    """Gain tuning, profile recomputation, K-means and diverse pair selection."""
    _, backoff, _ = tune_profile(acp, tau_acp, step, max_backoff)
    points = profile_points(tuned_profile(acp, backoff), tau_acp)
    if not points:
        raise NoSecureBeamsError("no profile entry reaches the decode threshold")
    k, distortions = choose_k(points, k_max, seed, max_iter)
    clusters = kmeans(points, k, seed, max_iter)
    chosen = select_pairs(clusters, points, W, F, acp, backoff, tau_acp, min_sep)
    return SelectedPairs(chosen.pairs, chosen.clusters, k, tuple(distortions))
