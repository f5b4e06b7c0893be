"""Three-piece Floquet drive: imperfect pi pulse, Ising evolution, x-disorder.

The Ising and disorder pieces are diagonal in the x basis, so the cycle is
run in the frame obtained by a Hadamard on every site. There the two
diagonal pieces are pure phases, ``sigma^y -> -sigma^y`` and
``sigma^x -> -sigma^z``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from ..couplings import CouplingMatrix
from ..hilbert import HamiltonianSpec, IsingXX, SiteFields, SpinState, UniformField, build_state, evolve
from ..hilbert.basis import hadamard_all, z_signs
from ..hilbert.operators import x_diagonal_energies
from .disorder import DisorderEnsemble
from .observables import dft_magnitude


@dataclass(frozen=True)
class FloquetDrive:
    """Durations and pulse strength of one drive period ``T = t1 + t2 + t3``.

    ``t1`` defaults to ``pi / (2 g)`` and ``t3`` to ``pi / W`` (zero when
    ``W = 0``, where the disorder piece is the identity anyway).
    """

    g: float
    epsilon: float
    t1: float
    t2: float
    t3: float

    @classmethod
    def build(cls, epsilon: float, t2: float, width: float, g: float = 1.0, t1: float | None = None, t3: float | None = None):
        if not g > 0:
            raise ValueError(f"g must be positive, got {g}")
        if t1 is None:
            t1 = math.pi / (2 * g)
        if t3 is None:
            t3 = math.pi / width if width > 0 else 0.0
        return cls(g, epsilon, t1, t2, t3)

    def __post_init__(self):
        for name in ("t1", "t2", "t3"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if self.period <= 0:
            raise ValueError("drive period must be positive")

    @property
    def period(self) -> float:
        return self.t1 + self.t2 + self.t3


@dataclass(frozen=True, eq=False)
class DtcResult:
    """Stroboscopic response over a disorder ensemble.

    Attributes
    ----------
    times : ndarray
        ``k T`` for ``k = 1..n_periods``.
    magnetizations : ndarray
        ``<sigma_i^x(kT)>``, shape ``(n_realizations, n_periods, n)``.
    spectra : ndarray
        Per-site DFT magnitudes, same shape; frequency axis ``freqs``.
    freqs : ndarray
        ``k / (n_periods T)``.
    peak_heights : ndarray
        Site-averaged ``h(nu_tc)`` per realization.
    """

    drive: FloquetDrive
    times: np.ndarray
    magnetizations: np.ndarray
    spectra: np.ndarray
    freqs: np.ndarray
    peak_heights: np.ndarray
    seeds: list

    @property
    def tc_bin(self) -> int:
        return len(self.freqs) // 2

    @property
    def mean_spectrum(self) -> np.ndarray:
        """Spectrum averaged over sites and realizations."""
        return self.spectra.mean(axis=(0, 2))

    @property
    def peak_height(self) -> float:
        return float(self.peak_heights.mean())

    @property
    def peak_variance(self) -> float:
        return float(np.var(self.peak_heights))

    @property
    def peak_bin(self) -> int:
        """Bin of the largest mean spectral amplitude in ``[0, 1/(2T)]``."""
        return int(np.argmax(self.mean_spectrum[: self.tc_bin + 1]))

    @property
    def locked(self) -> bool:
        return self.peak_bin == self.tc_bin


def _check_periods(n_periods: int) -> None:
    if n_periods < 2 or n_periods % 2:
        raise ValueError(f"n_periods must be an even integer >= 2, got {n_periods}")


def stroboscopic_series(j: CouplingMatrix, drive: FloquetDrive, fields: np.ndarray, n_periods: int) -> np.ndarray:
    """``<sigma_i^x(kT)>`` for ``k = 1..n_periods`` from the all-down-x state, shape ``(n_periods, n)``."""
    n = j.n
    pulse = HamiltonianSpec(n, (UniformField("y", -drive.g * (1 - drive.epsilon)),))
    e2 = x_diagonal_energies(HamiltonianSpec(n, (IsingXX(j),)))
    e3 = x_diagonal_energies(HamiltonianSpec(n, (SiteFields("x", fields),)))
    phases = np.exp(-1j * (drive.t2 * e2 + drive.t3 * e3))
    zs = z_signs(n)
    state = SpinState(n, hadamard_all(build_state(n, "d", axis="x").amplitudes, n))
    out = np.empty((n_periods, n))
    for k in range(n_periods):
        state = evolve(state, pulse, drive.t1)
        state = SpinState(n, phases * state.amplitudes)
        out[k] = -(zs @ np.abs(state.amplitudes) ** 2)
    return out


def run_dtc(
    j: CouplingMatrix,
    epsilon: float,
    t2: float,
    ensemble: DisorderEnsemble,
    *,
    g: float = 1.0,
    t1: float | None = None,
    t3: float | None = None,
    n_periods: int = 100,
    map_fn: Callable = map,
) -> DtcResult:
    """Drive the chain for ``n_periods`` cycles in every disorder realization.

    ``j`` is in units of ``J0``, so ``t2`` is ``J0 t2``; the pulse rotates
    each spin by ``2 g (1 - epsilon) t1`` about y.
    """
    _check_periods(n_periods)
    drive = FloquetDrive.build(epsilon, t2, ensemble.width, g, t1, t3)
    n = j.n
    series = list(map_fn(lambda k: stroboscopic_series(j, drive, ensemble.fields(k, n), n_periods), range(ensemble.n_realizations)))
    mags = np.array(series)
    spectra = dft_magnitude(mags, axis=1)
    return DtcResult(
        drive=drive,
        times=drive.period * np.arange(1, n_periods + 1),
        magnetizations=mags,
        spectra=spectra,
        freqs=np.arange(n_periods) / (n_periods * drive.period),
        peak_heights=spectra[:, n_periods // 2, :].mean(axis=1),
        seeds=ensemble.seeds,
    )


@dataclass(frozen=True, eq=False)
class PhaseScanResult:
    """``peak_variance[a, b]`` is the variance for ``epsilons[a]`` and ``t2_values[b]``."""

    epsilons: np.ndarray
    t2_values: np.ndarray
    peak_height: np.ndarray
    peak_variance: np.ndarray
    eps_star: np.ndarray
    flat: np.ndarray
    slope: float
    slope_stderr: float
    intercept: float


def dtc_phase_scan(
    j: CouplingMatrix,
    epsilons: Sequence[float],
    t2_values: Sequence[float],
    ensemble: DisorderEnsemble,
    *,
    g: float = 1.0,
    n_periods: int = 100,
    flat_tol: float = 1e-12,
    map_fn: Callable = map,
) -> PhaseScanResult:
    """Locate the crossover ``eps*`` per ``J0 t2`` from the peak of ``Var h(nu_tc)``.

    A column whose variance varies by less than ``flat_tol`` (relative) has
    no peak and is flagged; flagged columns are left out of the linear fit
    of ``eps*`` against ``J0 t2``.
    """
    _check_periods(n_periods)
    eps = np.asarray(epsilons, dtype=float)
    t2s = np.asarray(t2_values, dtype=float)
    if eps.size == 0 or t2s.size == 0:
        raise ValueError("epsilon and t2 grids must be nonempty")
    n = j.n
    nr = ensemble.n_realizations
    fields = ensemble.realizations(n)
    items = [(a, b, k) for a in range(eps.size) for b in range(t2s.size) for k in range(nr)]

    def one(item):
        a, b, k = item
        drive = FloquetDrive.build(eps[a], t2s[b], ensemble.width, g)
        s = dft_magnitude(stroboscopic_series(j, drive, fields[k], n_periods), axis=0)
        return s[n_periods // 2].mean()

    h = np.array(list(map_fn(one, items))).reshape(eps.size, t2s.size, nr)
    var = np.var(h, axis=2)
    flat = np.ptp(var, axis=0) <= flat_tol * (1.0 + var.max(axis=0))
    star = eps[np.argmax(var, axis=0)]
    good = ~flat
    slope = stderr = intercept = float("nan")
    if good.sum() >= 3:
        fit = stats.linregress(t2s[good], star[good])
        slope, stderr, intercept = float(fit.slope), float(fit.stderr), float(fit.intercept)
    elif good.sum() == 2:
        slope, intercept = (float(c) for c in np.polyfit(t2s[good], star[good], 1))
    return PhaseScanResult(eps, t2s, h.mean(axis=2), var, star, flat, slope, stderr, intercept)
