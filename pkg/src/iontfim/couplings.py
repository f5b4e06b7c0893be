"""Phonon-mediated Ising couplings and their power-law description.

Couplings follow the off-resonant Molmer-Sorensen mode sum

    J_ij = Omega^2 w_R sum_m b_im b_jm / (mu^2 - w_m^2),

with everything in angular units (rad/s).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import constants

from .errors import FitError, NoSolutionError, ResonanceError
from .ionchain import ModeSpectrum, TrapConfig, chain_modes

TWO_PI = 2 * np.pi
DEFAULT_GUARD_BAND = TWO_PI * 100.0
# counter-propagating-at-90-degrees 355 nm Raman beams
DEFAULT_DELTA_K = np.sqrt(2) * TWO_PI / 355e-9


class LambDickeWarning(UserWarning):
    """Raman parameters leave the Lamb-Dicke / detuned regime."""


@dataclass(frozen=True)
class RamanConfig:
    """Global bichromatic Raman drive.

    ``recoil_freq`` may be left as ``None``; it is then derived from
    ``delta_k`` and the ion mass when couplings are computed.
    """

    rabi_freq: float
    beatnote: float
    delta_k: float = DEFAULT_DELTA_K
    recoil_freq: float | None = None

    def __post_init__(self):
        for name in ("rabi_freq", "beatnote", "delta_k"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.recoil_freq is not None and not self.recoil_freq > 0:
            raise ValueError(f"recoil_freq must be positive, got {self.recoil_freq}")

    def recoil(self, mass: float) -> float:
        if self.recoil_freq is not None:
            return self.recoil_freq
        return constants.hbar * self.delta_k**2 / (2 * mass)

    def lamb_dicke(self, mass: float, mode_freqs: np.ndarray) -> np.ndarray:
        return self.delta_k * np.sqrt(constants.hbar / (2 * mass * np.asarray(mode_freqs)))


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric Ising coupling matrix with zero diagonal."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"coupling matrix must be square, got shape {v.shape}")
        if not np.array_equal(v, v.T):
            raise ValueError("coupling matrix must be exactly symmetric")
        if np.any(np.diag(v) != 0):
            raise ValueError("coupling matrix must have a zero diagonal")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_upper(cls, m: np.ndarray) -> "CouplingMatrix":
        """Symmetrize from the strict upper triangle of ``m``."""
        up = np.triu(np.asarray(m, dtype=float), 1)
        return cls(up + up.T)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def nearest_neighbor_mean(self) -> float:
        """Mean of ``|J_{i,i+1}|``, the J0 of a power-law description."""
        if self.n < 2:
            raise ValueError("need at least two sites")
        return float(np.mean(np.abs(np.diag(self.values, 1))))

    def scaled(self, factor: float) -> "CouplingMatrix":
        return CouplingMatrix(self.values * factor)

    def in_units_of_j0(self) -> "CouplingMatrix":
        return self.scaled(1.0 / self.nearest_neighbor_mean())


@dataclass(frozen=True)
class PowerLawFit:
    j0: float
    alpha: float
    residual: float


@dataclass(frozen=True)
class LightShiftParams:
    g0: float
    delta: float
    delta2: float
    qubit_freq: float

    def __post_init__(self):
        if self.delta == 0 or self.delta2 == 0:
            raise ValueError("delta and delta2 must be nonzero")


def power_law_matrix(n: int, alpha: float, j0: float = 1.0) -> CouplingMatrix:
    """Idealized ``J_ij = j0 / |i-j|^alpha``."""
    r = np.abs(np.subtract.outer(np.arange(n), np.arange(n))).astype(float)
    np.fill_diagonal(r, np.inf)
    return CouplingMatrix.from_upper(j0 / r**alpha)


def compute_couplings(
    raman: RamanConfig,
    modes: ModeSpectrum,
    *,
    mass: float | None = None,
    guard_band: float = DEFAULT_GUARD_BAND,
) -> CouplingMatrix:
    """Mode-sum coupling matrix for a global Raman beatnote.

    ``mass`` is needed only when ``raman.recoil_freq`` is not given or when
    Lamb-Dicke diagnostics are wanted.

    Raises
    ------
    ResonanceError
        If the beatnote lies within ``guard_band`` of any mode.
    """
    mu = raman.beatnote
    w = modes.frequencies
    gap = np.abs(mu - w)
    m = int(np.argmin(gap))
    if gap[m] < guard_band:
        raise ResonanceError(
            f"beatnote {mu:.6g} rad/s is within {gap[m]:.3g} rad/s of mode {m + 1} "
            f"({w[m]:.6g} rad/s); guard band is {guard_band:.3g} rad/s"
        )
    if mass is None and raman.recoil_freq is None:
        raise ValueError("mass is required when recoil_freq is not set")
    if mass is not None:
        eta = raman.lamb_dicke(mass, w)
        if np.any(eta >= 0.3):
            warnings.warn(f"Lamb-Dicke parameter up to {eta.max():.3f} (>= 0.3)", LambDickeWarning, stacklevel=2)
        if np.any(gap < 5 * eta * raman.rabi_freq):
            warnings.warn(
                "beatnote detuning is not >> eta*Omega for every mode; spin-phonon entanglement is not negligible",
                LambDickeWarning,
                stacklevel=2,
            )
    b = modes.eigenvectors
    kernel = (b / (mu**2 - w**2)) @ b.T
    return CouplingMatrix.from_upper(raman.rabi_freq**2 * raman.recoil(mass) * kernel)


def fit_power_law(j: CouplingMatrix) -> PowerLawFit:
    """Least-squares fit of ``log|J_ij|`` against ``log|i-j|`` over all pairs.

    ``alpha`` is minus the slope; ``j0`` is the mean nearest-neighbour
    magnitude rather than the fitted intercept. ``residual`` is the RMS
    misfit in natural-log space.
    """
    n = j.n
    if n < 3:
        raise FitError(f"power-law fit needs at least 3 sites, got {n}")
    i, k = np.triu_indices(n, 1)
    mags = np.abs(j.values[i, k])
    if np.any(mags == 0):
        raise FitError("coupling matrix has zero entries; log-log fit undefined")
    x = np.log((k - i).astype(float))
    y = np.log(mags)
    a = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - (slope * x + intercept)
    return PowerLawFit(j0=j.nearest_neighbor_mean(), alpha=float(-slope), residual=float(np.sqrt(np.mean(resid**2))))


def _alpha_at(mu, raman, modes, mass, guard_band):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LambDickeWarning)
        jm = compute_couplings(replace(raman, beatnote=mu), modes, mass=mass, guard_band=guard_band)
    return fit_power_law(jm).alpha


def detuning_for_range(
    trap: TrapConfig,
    raman_template: RamanConfig,
    target_alpha: float,
    bracket: tuple[float, float] | None = None,
    *,
    alpha_tol: float = 1e-6,
    guard_band: float = DEFAULT_GUARD_BAND,
    max_iter: int = 200,
) -> RamanConfig:
    """Bisect the beatnote above the COM mode until the fitted alpha hits the target.

    The default bracket runs from just outside the guard band above the COM
    mode to ten times the transverse frequency.

    Raises
    ------
    NoSolutionError
        If the fitted alpha at the bracket ends does not straddle the target.
    """
    _, modes = chain_modes(trap)
    com = modes.com_frequency
    if bracket is None:
        bracket = (com + 2 * guard_band, 10 * trap.transverse_freq)
    lo, hi = map(float, bracket)
    if not (com < lo < hi):
        raise NoSolutionError(f"bracket ({lo:.6g}, {hi:.6g}) must lie above the COM mode at {com:.6g} rad/s")
    a_lo = _alpha_at(lo, raman_template, modes, trap.mass, guard_band) - target_alpha
    a_hi = _alpha_at(hi, raman_template, modes, trap.mass, guard_band) - target_alpha
    if a_lo == 0:
        return replace(raman_template, beatnote=lo)
    if a_hi == 0:
        return replace(raman_template, beatnote=hi)
    if a_lo * a_hi > 0:
        raise NoSolutionError(
            f"target alpha {target_alpha} not bracketed: alpha spans "
            f"[{a_lo + target_alpha:.4f}, {a_hi + target_alpha:.4f}] on ({lo:.6g}, {hi:.6g}) rad/s"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        a_mid = _alpha_at(mid, raman_template, modes, trap.mass, guard_band) - target_alpha
        if abs(a_mid) <= alpha_tol or hi - lo <= 4 * np.spacing(mid):
            return replace(raman_template, beatnote=mid)
        if (a_mid < 0) == (a_lo < 0):
            lo, a_lo = mid, a_mid
        else:
            hi = mid
    raise NoSolutionError(f"bisection did not reach |alpha - target| <= {alpha_tol} in {max_iter} steps")


def fourth_order_shift(p: LightShiftParams) -> dict:
    """Fourth-order light shift from a comb pair offset ``delta2`` from the qubit.

    Returns ``shift4`` (rad/s) and its ratio to the second-order AC Stark shift.
    """
    rabi = p.g0**2 / (2 * p.delta)
    return {
        "shift4": rabi**2 / (2 * p.delta2),
        "ratio_to_second_order": p.g0**2 / (4 * p.delta2 * p.qubit_freq),
    }


def accessible_window(fit: PowerLawFit, j0_max: float = TWO_PI * 1e3, alpha_range=(0.5, 2.0)) -> dict:
    """Report whether a fit lies in the experimentally accessible window.

    This is a report, not a constraint; ``j0`` must be in rad/s.
    """
    lo, hi = alpha_range
    return {
        "alpha_in_range": bool(lo < fit.alpha < hi),
        "j0_in_range": bool(abs(fit.j0) <= j0_max),
        "alpha_range": [lo, hi],
        "j0_max": j0_max,
    }


def couplings_for_alpha(
    trap: TrapConfig,
    target_alpha: float,
    raman_template: RamanConfig | None = None,
    *,
    alpha_tol: float = 1e-6,
    guard_band: float = DEFAULT_GUARD_BAND,
) -> tuple[CouplingMatrix, PowerLawFit, RamanConfig]:
    """Mode-sum couplings tuned to a fitted range exponent, in units of ``J0``.

    The returned matrix has mean nearest-neighbour magnitude 1; the fit
    keeps ``j0`` in rad/s. The Rabi frequency of the template only sets
    the overall scale, so the Lamb-Dicke diagnostics are left to
    ``compute_couplings`` callers who care about absolute units.
    """
    if raman_template is None:
        raman_template = RamanConfig(rabi_freq=TWO_PI * 1e5, beatnote=trap.transverse_freq * 1.1)
    raman = detuning_for_range(trap, raman_template, target_alpha, alpha_tol=alpha_tol, guard_band=guard_band)
    _, modes = chain_modes(trap)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LambDickeWarning)
        jm = compute_couplings(raman, modes, mass=trap.mass, guard_band=guard_band)
    fit = fit_power_law(jm)
    return jm.in_units_of_j0(), fit, raman
