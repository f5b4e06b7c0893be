"""Disordered quench from the Neel state."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ..couplings import CouplingMatrix
from ..hilbert import DEFAULT_PROPAGATOR, HamiltonianSpec, IsingXX, Propagator, SiteFields, UniformField
from ..hilbert import build_state, evolve_times, expect_local, neel_spec
from .disorder import DisorderEnsemble
from .observables import hamming_distance, neel_pattern

STEADY_FROM = 5.0


@dataclass(frozen=True, eq=False)
class QuenchResult:
    """Single-realization quench.

    Attributes
    ----------
    times : ndarray
        ``J0 t`` grid.
    magnetizations : ndarray
        ``<sigma_i^z(t)>``, shape ``(n_times, n)``.
    hamming : ndarray
        Normalized Hamming distance against the Neel pattern.
    steady_state_hd : float
        Mean of ``hamming`` over ``J0 t >= steady_from``.
    fields : ndarray
        Disorder vector ``D_i`` used for this realization.
    seed : int
    """

    times: np.ndarray
    magnetizations: np.ndarray
    hamming: np.ndarray
    steady_state_hd: float
    fields: np.ndarray
    seed: int


@dataclass(frozen=True, eq=False)
class MblResult:
    realizations: list
    times: np.ndarray
    mean_magnetizations: np.ndarray
    mean_hamming: np.ndarray
    stderr_hamming: np.ndarray
    steady_state_hd: float
    steady_state_stderr: float


def mbl_hamiltonian(j: CouplingMatrix, b_field: float, fields: np.ndarray) -> HamiltonianSpec:
    """``sum J sigma^x sigma^x + (B/2) sum sigma^z + sum D_i sigma^z``."""
    return HamiltonianSpec(j.n, (IsingXX(j), UniformField("z", b_field / 2), SiteFields("z", fields)))


def _steady(times, hd, steady_from):
    window = times >= steady_from
    if not window.any():
        raise ValueError(f"time grid ends before J0 t = {steady_from}")
    return float(np.mean(hd[window]))


def _stderr(x: np.ndarray) -> np.ndarray:
    if x.shape[0] < 2:
        return np.zeros(x.shape[1:])
    return np.std(x, axis=0, ddof=1) / np.sqrt(x.shape[0])


def run_mbl_quench(
    j: CouplingMatrix,
    b_field: float,
    ensemble: DisorderEnsemble,
    t_max: float = 10.0,
    n_times: int = 101,
    *,
    steady_from: float = STEADY_FROM,
    prop: Propagator = DEFAULT_PROPAGATOR,
    map_fn: Callable = map,
) -> MblResult:
    """Quench the Neel state under the disordered transverse-field Ising chain.

    Parameters
    ----------
    j : CouplingMatrix
        Couplings in units of ``J0``; times are then ``J0 t``.
    b_field : float
        ``B / J0``.
    ensemble : DisorderEnsemble
        Site fields along z.
    map_fn : callable
        ``map``-like function used to run realizations (e.g. an executor's
        ``map``); results are reduced in realization order.
    """
    n = j.n
    times = np.linspace(0.0, t_max, n_times)
    psi0 = build_state(n, neel_spec(n))
    pattern = neel_pattern(n)
    seeds = ensemble.seeds

    def one(k: int) -> QuenchResult:
        d = ensemble.fields(k, n)
        states = evolve_times(psi0, mbl_hamiltonian(j, b_field, d), times, prop)
        mags = expect_local(states, n, "z")
        hd = hamming_distance(mags, pattern)
        return QuenchResult(times, mags, hd, _steady(times, hd, steady_from), d, seeds[k])

    if ensemble.width == 0:
        # every realization has D = 0; only the recorded seeds differ
        first = one(0)
        runs = [replace(first, seed=seeds[k]) for k in range(ensemble.n_realizations)]
    else:
        runs = list(map_fn(one, range(ensemble.n_realizations)))
    hd = np.array([r.hamming for r in runs])
    ss = np.array([r.steady_state_hd for r in runs])
    return MblResult(
        realizations=runs,
        times=times,
        mean_magnetizations=np.mean([r.magnetizations for r in runs], axis=0),
        mean_hamming=hd.mean(axis=0),
        stderr_hamming=_stderr(hd),
        steady_state_hd=_steady(times, hd.mean(axis=0), steady_from),
        steady_state_stderr=float(_stderr(ss[:, None])[0]),
    )
