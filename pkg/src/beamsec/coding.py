"""Finite joint wiretap code: product codebook over beam pairs with random binning.

Codewords are abstract indices. A product codeword is the tuple of component
indices (one per beam pair), flattened in C order. Eve's view is all-or-nothing
per beam pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

ENUMERATION_LIMIT = 2 ** 20


class DecodeError(ValueError):
    """A component codeword is missing, so the message cannot be recovered."""


@dataclass(frozen=True, eq=False)
class BinPartition:
    sizes: tuple[int, ...]
    message_bits: int
    bins: np.ndarray  # bin id per flat product index

    @property
    def n_bins(self) -> int:
        return 2 ** self.message_bits

    @property
    def n_paths(self) -> int:
        return len(self.sizes)

    def members(self, message: int) -> np.ndarray:
        return np.flatnonzero(self.bins == message)


def component_bits(fractions: Sequence[float], rates: Sequence[float], block_length: int) -> list[int]:
    """Bits carried per beam pair, round(n * T_l * R_b,l)."""
    return [int(round(block_length * t * r)) for t, r in zip(fractions, rates)]


def build(sizes: Sequence[int], message_bits: int, seed: int) -> BinPartition:
    """Seeded balanced random partition of the product codebook into 2^message_bits bins."""
    sizes = tuple(int(s) for s in sizes)
    if not sizes:
        raise ValueError("need at least one component codebook")
    for s in sizes:
        if s < 1 or s & (s - 1):
            raise ValueError(f"component codebook sizes must be powers of two, got {s}")
    total = math.prod(sizes)
    if message_bits < 0 or total < 2 ** message_bits:
        raise ValueError(f"{total} product codewords cannot fill {2 ** message_bits} bins")
    rng = np.random.default_rng(seed)
    order = rng.permutation(total)
    bins = np.empty(total, dtype=np.int64)
    bins[order] = np.arange(total) % (2 ** message_bits)
    return BinPartition(sizes, int(message_bits), bins)


def encode(message: int, partition: BinPartition, seed: int) -> tuple[int, ...]:
    """Pick a uniformly random codeword of bin `message`; return its component indices."""
    if not 0 <= message < partition.n_bins:
        raise ValueError(f"message {message} outside [0, {partition.n_bins})")
    members = partition.members(message)
    rng = np.random.default_rng(seed)
    flat = int(members[rng.integers(len(members))])
    return tuple(int(i) for i in np.unravel_index(flat, partition.sizes))


def decode(indices: Sequence[Optional[int]], partition: BinPartition) -> int:
    if len(indices) != partition.n_paths or any(i is None for i in indices):
        raise DecodeError("cannot decode without every component codeword")
    flat = int(np.ravel_multi_index(tuple(int(i) for i in indices), partition.sizes))
    return int(partition.bins[flat])


def intercept_pattern(eve_snr: Sequence[float], tau_snr: float) -> tuple[bool, ...]:
    """Beam pairs Eve decodes: SNR at or above the threshold."""
    return tuple(bool(s >= tau_snr) for s in eve_snr)


def equivocation(partition: BinPartition, pattern: Sequence[bool]) -> float:
    """H(W | intercepted components) in bits, by exhaustive enumeration.

    The message is uniform and the encoder uniform within the bin, so codeword c has
    probability 1 / (n_bins * |bin(c)|).
    """
    pattern = tuple(bool(p) for p in pattern)
    if len(pattern) != partition.n_paths:
        raise ValueError(f"pattern length {len(pattern)} != {partition.n_paths} paths")
    total = math.prod(partition.sizes)
    if total > ENUMERATION_LIMIT:
        raise ValueError(f"product space {total} exceeds enumeration limit {ENUMERATION_LIMIT}")
    bin_size = np.bincount(partition.bins, minlength=partition.n_bins)
    if not any(pattern):
        observed = np.zeros(total, dtype=np.int64)
        n_obs = 1
    else:
        comps = np.unravel_index(np.arange(total), partition.sizes)
        seen = [k for k, p in enumerate(pattern) if p]
        observed = np.ravel_multi_index(tuple(comps[k] for k in seen),
                                        tuple(partition.sizes[k] for k in seen))
        n_obs = math.prod(partition.sizes[k] for k in seen)
    # integer counts first, so balanced partitions give exact powers of two
    counts = np.zeros((n_obs, partition.n_bins), dtype=np.int64)
    np.add.at(counts, (observed, partition.bins), 1)
    joint = counts / (partition.n_bins * bin_size)
    p_obs = joint.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(joint > 0, joint / p_obs, 1.0)
        h = -np.sum(joint * np.log2(cond))
    h = float(h)
    return h if h > 0 else 0.0
