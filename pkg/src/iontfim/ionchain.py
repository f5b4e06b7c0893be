"""Equilibrium geometry and transverse normal modes of a linear ion chain.

Positions are solved in the dimensionless units of the characteristic length
``l = (q^2 / (4 pi eps0 M wz^2))**(1/3)``, where the potential is

    V(u) = sum_i u_i^2 / 2 + sum_{i<j} 1 / |u_i - u_j|.

Mode frequencies are returned in physical angular units (rad/s).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants

from .errors import ChainUnstableError, ConvergenceError

AMU = constants.atomic_mass
YB171_MASS = 170.936323 * AMU


@dataclass(frozen=True)
class TrapConfig:
    """Linear Paul trap holding ``n_ions`` ions.

    Frequencies are angular (rad/s); ``mass`` is in kg and ``charge`` in
    units of the elementary charge.
    """

    n_ions: int
    axial_freq: float
    transverse_freq: float
    mass: float = YB171_MASS
    charge: float = 1.0

    def __post_init__(self):
        if int(self.n_ions) != self.n_ions or self.n_ions < 1:
            raise ValueError(f"n_ions must be a positive integer, got {self.n_ions}")
        for name in ("axial_freq", "transverse_freq", "mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.charge == 0:
            raise ValueError("charge must be nonzero")

    @property
    def aspect_ratio(self) -> float:
        return self.transverse_freq / self.axial_freq

    @property
    def length_scale(self) -> float:
        """Characteristic length ``l`` in metres."""
        q = self.charge * constants.e
        return (q**2 / (4 * np.pi * constants.epsilon_0 * self.mass * self.axial_freq**2)) ** (1 / 3)


@dataclass(frozen=True)
class EquilibriumPositions:
    positions: np.ndarray
    length_scale: float

    @property
    def n_ions(self) -> int:
        return len(self.positions)

    @property
    def physical(self) -> np.ndarray:
        """Positions in metres."""
        return self.positions * self.length_scale


@dataclass(frozen=True)
class ModeSpectrum:
    """Transverse modes, highest frequency (centre of mass) first.

    ``eigenvectors[:, m]`` is the amplitude pattern ``b_{i,m}`` of mode ``m``.
    """

    frequencies: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)

    @property
    def com_frequency(self) -> float:
        return float(self.frequencies[0])


def _gradient(u: np.ndarray) -> np.ndarray:
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, np.inf)
    return u - np.sum(np.sign(d) / d**2, axis=1)


def _hessian(u: np.ndarray) -> np.ndarray:
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, np.inf)
    k = 2.0 / d**3
    h = -k
    np.fill_diagonal(h, 1.0 + k.sum(axis=1))
    return h


def _potential(u: np.ndarray) -> float:
    i, j = np.triu_indices(len(u), 1)
    return 0.5 * float(u @ u) + float(np.sum(1.0 / np.abs(u[i] - u[j])))


def solve_equilibrium(trap: TrapConfig, *, tol: float = 1e-12, max_iter: int = 10_000) -> EquilibriumPositions:
    """Find the stationary point of the dimensionless chain potential.

    Damped Newton iteration with a backtracking line search on the potential.
    If the gradient cannot be pushed below ``tol`` because of round-off, a
    result is still accepted as long as the gradient norm is below 1e-10.

    Raises
    ------
    ConvergenceError
        If the iteration cap is hit before the gradient norm drops below 1e-10.
    """
    n = trap.n_ions
    if n == 1:
        return EquilibriumPositions(np.zeros(1), trap.length_scale)

    # minimum spacing of a long chain scales roughly as 2.018 / n^0.559
    spacing = 2.018 / n**0.559
    u = (np.arange(n) - (n - 1) / 2) * spacing
    best = np.inf
    stalled = 0
    for _ in range(max_iter):
        g = _gradient(u)
        gnorm = float(np.linalg.norm(g))
        if gnorm < tol:
            break
        if gnorm < best * 0.999:
            best = gnorm
            stalled = 0
        else:
            stalled += 1
            if stalled > 20 and best < 1e-10:
                break
        step = np.linalg.solve(_hessian(u), g)
        v0 = _potential(u)
        lam = 1.0
        while lam > 1e-12:
            trial = u - lam * step
            if np.all(np.diff(trial) > 0) and _potential(trial) <= v0 + 1e-14 * abs(v0):
                break
            lam *= 0.5
        u = trial
    gnorm = float(np.linalg.norm(_gradient(u)))
    if gnorm >= 1e-10:
        raise ConvergenceError(f"equilibrium solver stopped with gradient norm {gnorm:.3e} after {max_iter} iterations")
    # centre of charge exactly at the origin; mirror symmetry made explicit
    u = 0.5 * (u - u[::-1])
    return EquilibriumPositions(u, trap.length_scale)


def transverse_hessian(trap: TrapConfig, eq: EquilibriumPositions) -> np.ndarray:
    """Dimensionless transverse stiffness matrix (units of ``wz^2``)."""
    u = eq.positions
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, np.inf)
    k = 1.0 / d**3
    a = k.copy()
    np.fill_diagonal(a, trap.aspect_ratio**2 - k.sum(axis=1))
    return a


def _fix_sign(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    for m in range(v.shape[1]):
        col = v[:, m]
        s = col.sum()
        if abs(s) > 1e-9 * np.sqrt(len(col)):
            flip = s < 0
        else:
            first = col[np.abs(col) > 1e-9][0]
            flip = first < 0
        if flip:
            v[:, m] = -col
    return v


def transverse_modes(trap: TrapConfig, eq: EquilibriumPositions) -> ModeSpectrum:
    """Diagonalize the transverse Hessian.

    Raises
    ------
    ChainUnstableError
        If any eigenvalue is not positive (the linear chain buckles).
    """
    if eq.n_ions != trap.n_ions:
        raise ValueError(f"equilibrium has {eq.n_ions} ions, trap has {trap.n_ions}")
    lam, vec = np.linalg.eigh(transverse_hessian(trap, eq))
    order = np.argsort(lam)[::-1]
    lam, vec = lam[order], vec[:, order]
    bad = np.nonzero(lam <= 0)[0]
    if bad.size:
        m = int(bad[-1])
        raise ChainUnstableError(
            f"chain unstable at this aspect ratio ({trap.aspect_ratio:.4g}): "
            f"mode {m + 1} has squared frequency {lam[m] * trap.axial_freq**2:.4g} (rad/s)^2 "
            f"({bad.size} unstable mode(s))"
        )
    freqs = trap.axial_freq * np.sqrt(lam)
    return ModeSpectrum(frequencies=freqs, eigenvectors=_fix_sign(vec))


def chain_modes(trap: TrapConfig) -> tuple[EquilibriumPositions, ModeSpectrum]:
    eq = solve_equilibrium(trap)
    return eq, transverse_modes(trap, eq)
