from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .basis import MAX_SPINS, check_axis, indices, z_signs

NORM_TOL = 1e-10

_UP = {"u", "up", "+", "1", "↑"}
_DOWN = {"d", "down", "-", "0", "↓"}

_SQ = 1 / np.sqrt(2)
# (amp of bit 0 = down_z, amp of bit 1 = up_z)
_LOCAL = {
    ("z", +1): np.array([0, 1], dtype=complex),
    ("z", -1): np.array([1, 0], dtype=complex),
    ("x", +1): np.array([_SQ, _SQ], dtype=complex),
    ("x", -1): np.array([_SQ, -_SQ], dtype=complex),
    ("y", +1): np.array([1j * _SQ, _SQ], dtype=complex),
    ("y", -1): np.array([-1j * _SQ, _SQ], dtype=complex),
}


@dataclass(frozen=True, eq=False)
class SpinState:
    """Pure state of ``n_spins`` spin-1/2 particles in the z basis."""

    n_spins: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if not 1 <= self.n_spins <= MAX_SPINS:
            raise ValueError(f"n_spins must be in [1, {MAX_SPINS}], got {self.n_spins}")
        if amps.shape != (1 << self.n_spins,):
            raise ValueError(f"expected {1 << self.n_spins} amplitudes, got shape {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1) > NORM_TOL:
            raise ValueError(f"state norm {norm!r} deviates from 1 by more than {NORM_TOL}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return 1 << self.n_spins

    def overlap(self, other: "SpinState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "SpinState") -> float:
        return abs(self.overlap(other)) ** 2


def _parse_site(token, axis: str) -> tuple[str, int]:
    tok = str(token).strip().lower()
    if len(tok) == 2 and tok[0] in "+-" and tok[1] in "xyz":
        return tok[1], +1 if tok[0] == "+" else -1
    if tok in _UP:
        return axis, +1
    if tok in _DOWN:
        return axis, -1
    raise ValueError(f"malformed site spec {token!r}; use u/d or +x, -z, ...")


def build_state(n: int, spec: str | Sequence[str], axis: str = "z") -> SpinState:
    """Product state from a per-site description.

    ``spec`` is either a string of ``u``/``d`` characters (site 1 first) with
    a common ``axis``, or a sequence of tokens such as ``"+x"`` or ``"-z"``.
    A single-site spec is broadcast to all ``n`` sites.

    Sign conventions: ``|down>_x = (|down>_z - |up>_z)/sqrt(2)`` and
    ``|up>_y = (|up>_z + i|down>_z)/sqrt(2)``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    check_axis(axis)
    tokens = list(spec) if isinstance(spec, str) else list(spec)
    if len(tokens) == 1 and n > 1:
        tokens = tokens * n
    if len(tokens) != n:
        raise ValueError(f"site spec has {len(tokens)} entries for {n} sites")
    amps = np.ones(1, dtype=complex)
    for tok in tokens:
        # later sites are more significant bits
        amps = np.kron(_LOCAL[_parse_site(tok, axis)], amps)
    return SpinState(n, amps)


def neel_spec(n: int) -> str:
    """``'dudu...'``: site 1 down, alternating."""
    return "".join("d" if i % 2 == 0 else "u" for i in range(n))


def basis_state(n: int, up_sites: Sequence[int]) -> SpinState:
    """z-basis product state with the given one-based sites up."""
    amps = np.zeros(1 << n, dtype=complex)
    idx = 0
    for s in up_sites:
        if not 1 <= s <= n:
            raise ValueError(f"site {s} out of range 1..{n}")
        idx |= 1 << (s - 1)
    amps[idx] = 1
    return SpinState(n, amps)


def _check_site(n: int, site: int) -> int:
    if not 1 <= site <= n:
        raise IndexError(f"site {site} out of range 1..{n}")
    return site - 1


def expect_local(amps: np.ndarray, n: int, axis: str) -> np.ndarray:
    """Single-site expectations for every site.

    ``amps`` may be a single vector ``(dim,)`` or a stack ``(..., dim)``;
    the result has shape ``(..., n)``.
    """
    check_axis(axis)
    amps = np.asarray(amps)
    if axis == "z":
        return (np.abs(amps) ** 2) @ z_signs(n).T
    idx = indices(n)
    out = np.empty(amps.shape[:-1] + (n,))
    zs = z_signs(n)
    for i in range(n):
        flipped = amps[..., idx ^ (1 << i)]
        if axis == "x":
            out[..., i] = np.real(np.sum(amps.conj() * flipped, axis=-1))
        else:
            out[..., i] = np.real(np.sum(amps.conj() * (-1j * zs[i]) * flipped, axis=-1))
    return out


def measure(state: SpinState, site: int, axis: str) -> float:
    """``<psi| sigma_site^axis |psi>`` for a one-based ``site``."""
    i = _check_site(state.n_spins, site)
    check_axis(axis)
    amps = state.amplitudes
    if axis == "z":
        return float(np.sum(np.abs(amps) ** 2 * z_signs(state.n_spins)[i]))
    flipped = amps[indices(state.n_spins) ^ (1 << i)]
    if axis == "x":
        val = np.vdot(amps, flipped)
    else:
        val = np.vdot(amps, -1j * z_signs(state.n_spins)[i] * flipped)
    return float(val.real)


def magnetizations(state: SpinState, axis: str) -> np.ndarray:
    return expect_local(state.amplitudes, state.n_spins, axis)
