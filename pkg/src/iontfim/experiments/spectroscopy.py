"""Coupling spectroscopy with a weakly modulated transverse field.

Splitting labels refer to classical Ising energies ``E(s) = sum_{i<j} J_ij s_i s_j``
measured from the all-up configuration (one-based sites):

* ``(i,)`` is ``Delta E_i``, the cost of flipping ``i``; it equals ``-2 sum_j J_ij``.
* ``(i, j)`` is ``Delta E_{j|i}``, the cost of flipping ``j`` once ``i`` is
  already flipped; it equals ``Delta E_j + 4 J_ij``.

The energy is invariant under a global flip, so a chain prepared along
``-x`` with a few sites along ``+x`` has the same splittings.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.signal import find_peaks

from ..couplings import CouplingMatrix
from ..errors import UnderdeterminedError
from ..hilbert import DEFAULT_PROPAGATOR, HamiltonianSpec, IsingXX, ModulatedField, Propagator, build_state, evolve_many

Label = tuple
DEGENERATE_RTOL = 1e-9


def _config(n: int, flipped: Iterable[int]) -> np.ndarray:
    s = np.ones(n)
    for i in flipped:
        if not 1 <= i <= n:
            raise ValueError(f"site {i} out of range 1..{n}")
        s[i - 1] = -1
    return s


def ising_energy(j: CouplingMatrix, s: np.ndarray) -> float:
    return 0.5 * float(s @ j.values @ s)


def check_label(label: Sequence[int], n: int) -> Label:
    label = tuple(int(x) for x in label)
    if len(label) not in (1, 2) or len(set(label)) != len(label) or any(not 1 <= x <= n for x in label):
        raise ValueError(f"invalid splitting label {label} for {n} sites; use (i,) or (i, j) with distinct sites")
    return label


def splitting_energy(j: CouplingMatrix, label: Sequence[int]) -> float:
    """Classical splitting for ``label`` from explicit configuration energies."""
    label = check_label(label, j.n)
    before = _config(j.n, label[:-1])
    after = _config(j.n, label)
    return ising_energy(j, after) - ising_energy(j, before)


def synthetic_splittings(j: CouplingMatrix, labels: Iterable[Label] | None = None) -> dict:
    labels = default_measurement_set(j.n) if labels is None else labels
    return {check_label(lab, j.n): splitting_energy(j, lab) for lab in labels}


def default_measurement_set(n: int) -> list:
    """Every single flip from all-up, then every ordered second flip."""
    singles = [(i,) for i in range(1, n + 1)]
    pairs = [(i, k) for i, k in itertools.permutations(range(1, n + 1), 2)]
    return singles + pairs


def _pairs(n: int) -> list:
    return [(a, b) for a in range(n) for b in range(a + 1, n)]


def design_matrix(labels: Sequence[Label], n: int) -> np.ndarray:
    """Rows map the upper-triangle couplings ``J_ab`` (a < b, row-major) to each splitting."""
    col = {p: c for c, p in enumerate(_pairs(n))}
    a = np.zeros((len(labels), len(col)))
    for r, lab in enumerate(labels):
        lab = check_label(lab, n)
        k = lab[-1] - 1
        given = {x - 1 for x in lab[:-1]}
        for m in range(n):
            if m == k:
                continue
            # flipping k changes s_k s_m from s_m to -s_m, with s_m = -1 on already-flipped sites
            a[r, col[tuple(sorted((k, m)))]] += 2.0 if m in given else -2.0
    return a


def condition_number(labels: Sequence[Label], n: int) -> float:
    return float(np.linalg.cond(design_matrix(labels, n)))


def reconstruct_couplings(splittings: Mapping[Label, float], n: int) -> CouplingMatrix:
    """Least-squares inversion of labeled splittings into ``J``.

    Raises
    ------
    UnderdeterminedError
        If the labeled set does not fix every ``J_ij``; the message lists the
        undetermined pairs and the conditional flips that would fix them.
    """
    if n < 2:
        raise ValueError("need at least two sites")
    labels = [check_label(lab, n) for lab in splittings]
    if not labels:
        raise UnderdeterminedError("no splittings given")
    a = design_matrix(labels, n)
    b = np.array([float(splittings[lab]) for lab in splittings])
    pairs = _pairs(n)
    rank = np.linalg.matrix_rank(a)
    if rank < len(pairs):
        _, _, vt = np.linalg.svd(a)
        null = vt[rank:]
        loose = [pairs[c] for c in range(len(pairs)) if np.max(np.abs(null[:, c])) > 1e-9]
        have = set(labels)
        missing = [(x + 1, y + 1) for x, y in loose if (x + 1, y + 1) not in have and (y + 1, x + 1) not in have]
        raise UnderdeterminedError(
            f"splittings determine only {rank} of {len(pairs)} couplings; undetermined pairs "
            f"{[(x + 1, y + 1) for x, y in loose]}; add conditional flips such as "
            + ", ".join(f"dE_{{{q}|{p}}}" for p, q in missing)
        )
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    up = np.zeros((n, n))
    for c, (p, q) in enumerate(pairs):
        up[p, q] = x[c]
    return CouplingMatrix.from_upper(up)


@dataclass(frozen=True)
class Transition:
    """Single spin flip out of the prepared configuration.

    ``energy`` is the signed model energy change. ``label`` names the
    splitting it measures and ``parity`` relates them:
    ``splitting[label] = parity * energy``. Flips with no standard label
    (more than one site already flipped) have ``label = None``.
    """

    site: int
    energy: float
    label: Label | None
    parity: int


def model_transitions(j: CouplingMatrix, flipped: Sequence[int] = ()) -> list:
    n = j.n
    flipped = tuple(flipped)
    s = _config(n, flipped)
    e0 = ising_energy(j, s)
    out = []
    for k in range(1, n + 1):
        s2 = s.copy()
        s2[k - 1] *= -1
        de = ising_energy(j, s2) - e0
        if not flipped:
            label, parity = (k,), 1
        elif len(flipped) == 1 and k == flipped[0]:
            label, parity = (k,), -1
        elif len(flipped) == 1:
            label, parity = (flipped[0], k), 1
        else:
            label, parity = None, 1
        out.append(Transition(k, de, label, parity))
    return out


@dataclass(frozen=True)
class ExtractedSplitting:
    """A measured line assigned to one or more model transitions.

    ``status`` is ``"resolved"`` for a single transition and ``"degenerate"``
    when several transitions share the same model splitting exactly.
    """

    frequency: float
    height: float
    transitions: tuple
    status: str

    @property
    def values(self) -> dict:
        """Labeled splittings implied by this line (model signs, measured magnitude)."""
        out = {}
        for t in self.transitions:
            if t.label is not None:
                out[t.label] = t.parity * math.copysign(self.frequency, t.energy)
        return out


@dataclass(frozen=True, eq=False)
class SpectroscopyScan:
    """Population transfer versus angular probe frequency.

    Attributes
    ----------
    response : ndarray
        ``1 - |<psi0|psi(t)>|^2`` per probe frequency.
    peaks : ndarray
        Refined peak positions (angular units) above the noise floor.
    extracted_splittings : list of ExtractedSplitting
    unresolved : list of tuple
        Groups of distinct model splittings closer than ``resolution``; their
        lines are reported here and not assigned.
    unassigned : list of float
        Peaks with no model transition within ``resolution``.
    reconstructed : CouplingMatrix or None
        Couplings inverted from this scan alone, when it determines them.
    """

    probe_freqs: np.ndarray
    response: np.ndarray
    peaks: np.ndarray
    peak_heights: np.ndarray
    extracted_splittings: list
    unresolved: list
    unassigned: list
    resolution: float
    flipped: tuple
    reconstructed: CouplingMatrix | None = field(default=None)

    @property
    def splittings(self) -> dict:
        out = {}
        for e in self.extracted_splittings:
            out.update(e.values)
        return out


def _refine(x: np.ndarray, y: np.ndarray, i: int) -> float:
    """Vertex of the parabola through the three samples around ``i``."""
    if i == 0 or i == len(x) - 1:
        return float(x[i])
    c = np.polyfit(x[i - 1 : i + 2] - x[i], y[i - 1 : i + 2], 2)
    if c[0] >= 0:
        return float(x[i])
    return float(x[i] - c[1] / (2 * c[0]))


def find_lines(probe: np.ndarray, response: np.ndarray, floor_factor: float = 3.0):
    """Local maxima above ``floor_factor`` times the median response, parabola-refined."""
    floor = floor_factor * float(np.median(response))
    idx, props = find_peaks(response, height=max(floor, np.finfo(float).tiny))
    return np.array([_refine(probe, response, i) for i in idx]), props["peak_heights"]


def _group(transitions: list, resolution: float):
    """Cluster model lines by ``|energy|``; returns (degenerate groups, unresolved groups)."""
    ts = sorted(transitions, key=lambda t: abs(t.energy))
    clusters: list = []
    for t in ts:
        if clusters and abs(t.energy) - abs(clusters[-1][-1].energy) < resolution:
            clusters[-1].append(t)
        else:
            clusters.append([t])
    good, bad = [], []
    for c in clusters:
        e = [abs(t.energy) for t in c]
        scale = max(max(e), 1.0)
        (good if max(e) - min(e) <= DEGENERATE_RTOL * scale else bad).append(c)
    return good, bad


def assign_lines(peaks, heights, transitions, resolution):
    good, bad = _group(transitions, resolution)
    extracted, unassigned = [], []
    taken: dict = {}
    for f, h in zip(peaks, heights):
        centers = [abs(c[0].energy) for c in good] + [float(np.mean([abs(t.energy) for t in c])) for c in bad]
        if not centers:
            unassigned.append(float(f))
            continue
        d = np.abs(np.array(centers) - f)
        m = int(np.argmin(d))
        if d[m] > resolution:
            unassigned.append(float(f))
            continue
        # keep the tallest peak per line; sidelobes of the same line are dropped
        if m not in taken or h > taken[m][1]:
            taken[m] = (float(f), float(h))
    for m, (f, h) in sorted(taken.items()):
        if m < len(good):
            c = good[m]
            extracted.append(ExtractedSplitting(f, h, tuple(c), "resolved" if len(c) == 1 else "degenerate"))
    unresolved = [tuple(t.label if t.label is not None else t.site for t in c) for c in bad]
    return extracted, unresolved, unassigned


def default_duration(transitions: list, bp: float, resolution: float) -> float:
    """Pi pulse for the most degenerate model line.

    ``g`` degenerate transitions share one bright state driven ``sqrt(g)``
    times faster; a longer pulse over-rotates it and splits the line into
    two side humps, biasing the peak position.
    """
    good, _ = _group(transitions, resolution)
    g = max((len(c) for c in good), default=1)
    return math.pi / (bp * math.sqrt(g))


def run_spectroscopy(
    j: CouplingMatrix,
    probe_freqs: Sequence[float],
    *,
    b0: float = 0.0,
    bp: float = 0.05,
    duration: float | None = None,
    flipped: Sequence[int] = (),
    model: CouplingMatrix | None = None,
    resolution: float | None = None,
    floor_factor: float = 3.0,
    prop: Propagator = DEFAULT_PROPAGATOR,
) -> SpectroscopyScan:
    """Scan the probe frequency of ``(b0 + bp sin(w_p t)) sum sigma^y``.

    The chain starts along ``-x`` with the one-based sites in ``flipped``
    along ``+x``. ``probe_freqs`` are angular frequencies in the units of
    ``j``; the default duration is a resonant pi pulse for the most
    degenerate model line (see :func:`default_duration`). Lines
    are assigned using ``model`` (default: ``j`` itself), which also fixes
    the splitting signs the scan cannot see. ``resolution`` defaults to the
    larger of the grid step and ``bp``.

    The drive dresses the levels and pulls each line by roughly ``bp**2 / J0``
    (about 0.013 J0 at ``bp = 0.1``), hence the weaker default ``bp = 0.05``.
    """
    n = j.n
    probe = np.asarray(probe_freqs, dtype=float)
    if probe.ndim != 1 or probe.size < 3 or np.any(np.diff(probe) <= 0):
        raise ValueError("probe_freqs must be a strictly increasing grid of at least 3 points")
    if not bp > 0:
        raise ValueError(f"bp must be positive, got {bp}")
    model = j if model is None else model
    if model.n != n:
        raise ValueError("model and j act on different numbers of sites")
    flipped = tuple(int(x) for x in flipped)
    transitions = model_transitions(model, flipped)
    if resolution is None:
        resolution = max(float(np.max(np.diff(probe))), bp)
    if duration is None:
        duration = default_duration(transitions, bp, resolution)
    tokens = ["+x" if i in flipped else "-x" for i in range(1, n + 1)]
    psi0 = build_state(n, tokens)
    specs = [HamiltonianSpec(n, (IsingXX(j), ModulatedField("y", b0, bp, w / (2 * math.pi)))) for w in probe]
    finals = evolve_many(psi0, specs, duration, prop)
    response = np.clip(np.array([1.0 - psi0.fidelity(s) for s in finals]), 0.0, 1.0)
    peaks, heights = find_lines(probe, response, floor_factor)
    extracted, unresolved, unassigned = assign_lines(peaks, heights, transitions, resolution)
    scan = SpectroscopyScan(probe, response, peaks, heights, extracted, unresolved, unassigned, resolution, flipped)
    try:
        rec = reconstruct_couplings(scan.splittings, n) if scan.splittings else None
    except UnderdeterminedError:
        rec = None
    return SpectroscopyScan(probe, response, peaks, heights, extracted, unresolved, unassigned, resolution, flipped, rec)


def combine_scans(scans: Sequence[SpectroscopyScan], n: int) -> tuple[dict, CouplingMatrix]:
    """Pool labeled splittings from several scans (later scans do not overwrite earlier ones) and invert."""
    pooled: dict = {}
    for s in scans:
        for lab, v in s.splittings.items():
            pooled.setdefault(lab, v)
    return pooled, reconstruct_couplings(pooled, n)
