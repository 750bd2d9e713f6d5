"""Eavesdropper SNR under the quasi-omni, directional and colluding attacker models.

Channel arguments may carry leading batch dimensions, e.g. (n_samples, N_e, N_a);
the returned SNR then has the same leading shape.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import ArraySpec, NoiseSpec
from .codebook import Beam, Codebook, effective_power, make_codebook
from .scenario import Point2D


class AttackerKind(str, enum.Enum):
    QUASI_OMNI = "quasi_omni"
    DIRECTIONAL = "directional"
    COLLUDING = "colluding"


@dataclass(frozen=True, eq=False)
class EveNode:
    position: Point2D
    array: ArraySpec
    codebook: Codebook

    @classmethod
    def facing(cls, position: Point2D, target: Point2D, n_elements: int,
               spacing_over_lambda: float = 0.5, n_beams: int = 33,
               span: float = 180.0) -> "EveNode":
        """Eve with broadside pointed at `target` and a uniform sweep codebook."""
        array = ArraySpec(n_elements, spacing_over_lambda, position.bearing_to(target))
        return cls(position, array, make_codebook(array, n_beams, span))


@dataclass(frozen=True, eq=False)
class AttackerModel:
    kind: AttackerKind
    colluders: tuple[EveNode, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackerKind(self.kind))
        if self.kind is AttackerKind.COLLUDING and not self.colluders:
            raise ValueError("colluding attacker needs at least one node")


def _check(H, n_rx: int, n_tx: int):
    if H.shape[-2:] != (n_rx, n_tx):
        raise ValueError(f"channel shape {H.shape[-2:]} does not match ({n_rx}, {n_tx})")


def snr_quasi_omni(H_e, w: Beam, noise: NoiseSpec):
    """Eve combining with the all-ones vector: P |1^T H w|^2 / (N_e sigma^2)."""
    H_e = np.asarray(H_e)
    n_e = H_e.shape[-2]
    _check(H_e, n_e, len(w.weights))
    y = np.sum(H_e @ w.weights, axis=-1)
    return effective_power(noise, w.backoff) * np.abs(y) ** 2 / (n_e * noise.power)


def snr_directional(H_e, w: Beam, eve: EveNode, noise: NoiseSpec):
    """Best combiner from Eve's codebook: max_g P |g^H H w|^2 / sigma^2."""
    H_e = np.asarray(H_e)
    _check(H_e, eve.array.n_elements, len(w.weights))
    G = eve.codebook.matrix  # (N_e, |G|)
    y = np.einsum("eg,...e->...g", G.conj(), H_e @ w.weights)
    return effective_power(noise, w.backoff) * np.max(np.abs(y) ** 2, axis=-1) / noise.power


def snr_colluding(channels: Sequence, w: Beam, eves: Sequence[EveNode], noise: NoiseSpec):
    """Per transmission the best single reception among the colluders."""
    if len(channels) != len(eves):
        raise ValueError(f"{len(channels)} channels for {len(eves)} colluders")
    if not eves:
        raise ValueError("need at least one colluder")
    per_node = [snr_directional(H, w, eve, noise) for H, eve in zip(channels, eves)]
    return np.max(np.stack(per_node), axis=0)


def eve_snr_matrix(H_e, beams: Sequence[Beam], eve: EveNode, kind: AttackerKind,
                   noise: NoiseSpec) -> np.ndarray:
    """SNR of one Eve node for every transmit beam; shape (..., len(beams)).

    Vectorized form of snr_quasi_omni / snr_directional over a set of beams.
    """
    H_e = np.asarray(H_e)
    if not beams:
        return np.zeros(H_e.shape[:-2] + (0,))
    Wm = np.stack([b.weights for b in beams], axis=1)  # (N_a, L)
    _check(H_e, eve.array.n_elements, Wm.shape[0])
    power = effective_power(noise, [b.backoff for b in beams])
    HW = H_e @ Wm  # (..., N_e, L)
    if AttackerKind(kind) is AttackerKind.QUASI_OMNI:
        n_e = H_e.shape[-2]
        return power * np.abs(HW.sum(axis=-2)) ** 2 / (n_e * noise.power)
    y = np.einsum("eg,...el->...gl", eve.codebook.matrix.conj(), HW)
    return power * np.max(np.abs(y) ** 2, axis=-2) / noise.power
