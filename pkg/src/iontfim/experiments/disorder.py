"""Seeded ensembles of random site fields."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

MAX_SEED = 2**64 - 1


def realization_seed(master_seed: int, index: int) -> int:
    """Seed of realization ``index``: first 8 bytes (little endian) of ``sha256(f"{master}:{index}")``.

    Stated explicitly so external tools can regenerate the disorder vectors
    with ``numpy.random.Generator(PCG64(seed))``.
    """
    digest = hashlib.sha256(f"{int(master_seed)}:{int(index)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class DisorderEnsemble:
    """Independent uniform site fields ``D_i`` on ``[-W/2, W/2]``.

    Realization ``k`` draws ``W * (u - 1/2)`` with ``u`` from a PCG64 stream
    seeded by :func:`realization_seed`, so ensembles that differ only in
    ``width`` share their random numbers.
    """

    width: float
    n_realizations: int
    seed: int

    def __post_init__(self):
        if not self.width >= 0:
            raise ValueError(f"width must be >= 0, got {self.width}")
        if int(self.n_realizations) != self.n_realizations or self.n_realizations < 1:
            raise ValueError(f"n_realizations must be a positive integer, got {self.n_realizations}")
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def seeds(self) -> list[int]:
        return [realization_seed(self.seed, k) for k in range(self.n_realizations)]

    def fields(self, index: int, n_sites: int) -> np.ndarray:
        if not 0 <= index < self.n_realizations:
            raise IndexError(f"realization {index} out of range 0..{self.n_realizations - 1}")
        rng = np.random.Generator(np.random.PCG64(realization_seed(self.seed, index)))
        return self.width * (rng.random(n_sites) - 0.5)

    def realizations(self, n_sites: int) -> np.ndarray:
        """``(n_realizations, n_sites)`` array of site fields."""
        return np.array([self.fields(k, n_sites) for k in range(self.n_realizations)]).reshape(self.n_realizations, n_sites)
