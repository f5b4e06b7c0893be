"""Declarative Hamiltonians built from Ising, uniform-field and site-field terms.

Every term stores the literal coefficient that multiplies its Pauli sum, so
``UniformField("z", B / 2)`` is ``(B/2) sum_i sigma_i^z``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ..couplings import CouplingMatrix
from .basis import check_axis, indices, z_signs
from .state import SpinState


@dataclass(frozen=True, eq=False)
class IsingXX:
    """``sum_{i<j} J_ij sigma_i^x sigma_j^x``."""

    matrix: CouplingMatrix

    def __post_init__(self):
        if not isinstance(self.matrix, CouplingMatrix):
            object.__setattr__(self, "matrix", CouplingMatrix(np.asarray(self.matrix, dtype=float)))


@dataclass(frozen=True)
class UniformField:
    """``coefficient * sum_i sigma_i^axis``."""

    axis: str
    coefficient: float

    def __post_init__(self):
        check_axis(self.axis)


@dataclass(frozen=True, eq=False)
class SiteFields:
    """``sum_i values[i] * sigma_i^axis``."""

    axis: str
    values: np.ndarray

    def __post_init__(self):
        check_axis(self.axis)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True)
class ModulatedField:
    """``(static + amplitude * sin(2 pi frequency t)) * sum_i sigma_i^axis``."""

    axis: str
    static: float
    amplitude: float
    frequency: float

    def __post_init__(self):
        check_axis(self.axis)

    def coefficient(self, t: float) -> float:
        return self.static + self.amplitude * np.sin(2 * np.pi * self.frequency * t)


Term = Union[IsingXX, UniformField, SiteFields, ModulatedField]


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    n_spins: int
    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        n_mod = 0
        for t in terms:
            if isinstance(t, IsingXX):
                if t.matrix.n != self.n_spins:
                    raise ValueError(f"coupling matrix is {t.matrix.n}x{t.matrix.n}, expected {self.n_spins}")
            elif isinstance(t, SiteFields):
                if t.values.shape != (self.n_spins,):
                    raise ValueError(f"site fields have shape {t.values.shape}, expected ({self.n_spins},)")
            elif isinstance(t, ModulatedField):
                n_mod += 1
            elif not isinstance(t, UniformField):
                raise TypeError(f"unknown Hamiltonian term {t!r}")
        if n_mod > 1:
            raise ValueError("at most one ModulatedField term is allowed")

    def __add__(self, other: "HamiltonianSpec") -> "HamiltonianSpec":
        if other.n_spins != self.n_spins:
            raise ValueError("cannot add Hamiltonians on different numbers of spins")
        return HamiltonianSpec(self.n_spins, self.terms + other.terms)

    @property
    def modulated(self) -> ModulatedField | None:
        for t in self.terms:
            if isinstance(t, ModulatedField):
                return t
        return None

    @property
    def is_static(self) -> bool:
        return self.modulated is None

    def static_part(self) -> "HamiltonianSpec":
        return HamiltonianSpec(self.n_spins, tuple(t for t in self.terms if not isinstance(t, ModulatedField)))

    def at_time(self, t: float) -> "HamiltonianSpec":
        """Freeze the modulated term at time ``t``."""
        return HamiltonianSpec(
            self.n_spins,
            tuple(UniformField(x.axis, x.coefficient(t)) if isinstance(x, ModulatedField) else x for x in self.terms),
        )

    def local_fields(self) -> np.ndarray:
        """``(n, 3)`` array of static single-site field coefficients along x, y, z."""
        h = np.zeros((self.n_spins, 3))
        for t in self.terms:
            if isinstance(t, UniformField):
                h[:, "xyz".index(t.axis)] += t.coefficient
            elif isinstance(t, SiteFields):
                h[:, "xyz".index(t.axis)] += t.values
        return h

    def has_ising(self) -> bool:
        return any(isinstance(t, IsingXX) and np.any(t.matrix.values) for t in self.terms)

    def norm_bound(self) -> float:
        """Triangle-inequality bound on the operator norm of H(t), valid for all t."""
        s = 0.0
        for x in self.terms:
            if isinstance(x, IsingXX):
                s += np.abs(np.triu(x.matrix.values, 1)).sum()
        s += np.linalg.norm(self.local_fields(), axis=1).sum()
        mod = self.modulated
        if mod is not None:
            s += self.n_spins * (abs(mod.static) + abs(mod.amplitude))
        return float(s)


@dataclass
class Compiled:
    """``H = diag + sum_k coeff_k * P_k`` with ``(P_k psi)[idx] = psi[idx ^ mask_k]``."""

    n: int
    diag: np.ndarray
    masks: list
    coeffs: list


def compile_spec(spec: HamiltonianSpec, t: float = 0.0) -> Compiled:
    n = spec.n_spins
    zs = z_signs(n)
    diag = np.zeros(1 << n)
    masks: list[int] = []
    coeffs: list = []
    fields = spec.at_time(t).local_fields()
    for i in range(n):
        hx, hy, hz = fields[i]
        if hz:
            diag += hz * zs[i]
        if hx or hy:
            masks.append(1 << i)
            # sigma_y: (sigma_y psi)[k] = -i * zsign_i[k] * psi[k ^ m]
            coeffs.append(hx - 1j * hy * zs[i] if hy else hx)
    for term in spec.terms:
        if isinstance(term, IsingXX):
            jm = term.matrix.values
            for i in range(n):
                for j in range(i + 1, n):
                    if jm[i, j]:
                        masks.append((1 << i) | (1 << j))
                        coeffs.append(jm[i, j])
    return Compiled(n, diag, masks, coeffs)


def _apply_compiled(c: Compiled, psi: np.ndarray) -> np.ndarray:
    idx = indices(c.n)
    out = c.diag * psi if psi.ndim == 1 else c.diag[:, None] * psi
    out = out.astype(complex)
    for mask, coeff in zip(c.masks, c.coeffs):
        src = psi[idx ^ mask]
        if np.ndim(coeff) and psi.ndim > 1:
            coeff = coeff[:, None]
        out += coeff * src
    return out


def apply_hamiltonian(spec: HamiltonianSpec, state: SpinState | np.ndarray, t: float = 0.0) -> np.ndarray:
    """Matrix-free ``H(t)|psi>``; returns the unnormalized vector."""
    psi = state.amplitudes if isinstance(state, SpinState) else np.asarray(state, dtype=complex)
    if psi.shape[0] != 1 << spec.n_spins:
        raise ValueError(f"vector has length {psi.shape[0]}, expected {1 << spec.n_spins}")
    return _apply_compiled(compile_spec(spec, t), psi)


def matvec(spec: HamiltonianSpec, t: float = 0.0):
    """Return a closure ``psi -> H(t) psi`` with the term bookkeeping done once."""
    c = compile_spec(spec, t)
    return lambda psi: _apply_compiled(c, psi)


def to_dense(spec: HamiltonianSpec, t: float = 0.0) -> np.ndarray:
    c = compile_spec(spec, t)
    idx = indices(c.n)
    h = np.diag(c.diag).astype(complex)
    for mask, coeff in zip(c.masks, c.coeffs):
        h[idx, idx ^ mask] += coeff
    return h


def expectation(spec: HamiltonianSpec, state: SpinState, t: float = 0.0) -> float:
    return float(np.vdot(state.amplitudes, apply_hamiltonian(spec, state, t)).real)


def x_diagonal_energies(spec: HamiltonianSpec) -> np.ndarray | None:
    """Eigenvalues in the Hadamard-rotated basis if ``spec`` is diagonal in the x basis.

    Returns ``None`` when any term has a y or z component or is time dependent.
    Index ``k`` of the result labels the x-basis product state obtained by
    applying a Hadamard on every site to z-basis state ``k``.
    """
    if not spec.is_static:
        return None
    fields = spec.local_fields()
    if np.any(fields[:, 1:]):
        return None
    n = spec.n_spins
    zs = z_signs(n)
    # Hadamard maps sigma_x to -sigma_z in the (down, up) bit order
    e = -(fields[:, 0] @ zs)
    for term in spec.terms:
        if isinstance(term, IsingXX):
            jm = term.matrix.values
            for i in range(n):
                for j in range(i + 1, n):
                    if jm[i, j]:
                        e = e + jm[i, j] * zs[i] * zs[j]
    return np.asarray(e, dtype=float)
