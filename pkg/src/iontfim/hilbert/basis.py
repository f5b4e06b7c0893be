"""Bit conventions for the z basis.

Bit ``i`` of a basis index (site ``i+1``, least significant first) is 1 when
the spin points up along z. Single-site 2x2 matrices below are ordered
``(bit 0, bit 1) = (down, up)``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

MAX_SPINS = 20

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
}


@lru_cache(maxsize=32)
def indices(n: int) -> np.ndarray:
    out = np.arange(1 << n, dtype=np.int64)
    out.flags.writeable = False
    return out


@lru_cache(maxsize=32)
def z_signs(n: int) -> np.ndarray:
    """``(n, 2**n)`` array of sigma_z eigenvalues (+1 up, -1 down) per site."""
    idx = indices(n)
    out = np.array([2.0 * ((idx >> i) & 1) - 1.0 for i in range(n)]).reshape(n, 1 << n)
    out.flags.writeable = False
    return out


def check_axis(axis: str) -> str:
    if axis not in PAULI:
        raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}")
    return axis


def apply_local(psi: np.ndarray, n: int, site: int, u: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix to zero-based ``site`` of a state vector (returns a new array)."""
    a = psi.reshape((1 << (n - 1 - site), 2, 1 << site))
    return np.einsum("ab,ibj->iaj", u, a).reshape(-1)


def hadamard_all(psi: np.ndarray, n: int) -> np.ndarray:
    """Normalized Walsh-Hadamard transform on every site (extra trailing axes are batch axes).

    Maps the x basis onto the z basis with sigma_x -> -sigma_z in this
    package's (down, up) bit ordering.
    """
    a = np.array(psi, dtype=complex, copy=True)
    rest = a.shape[1:]
    for i in range(n):
        b = a.reshape((1 << (n - 1 - i), 2, 1 << i) + rest)
        lo = b[:, 0].copy()
        hi = b[:, 1]
        b[:, 0] = lo + hi
        b[:, 1] = lo - hi
    return a / np.sqrt(1 << n)
