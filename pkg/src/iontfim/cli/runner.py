"""Execute a validated config and write its outputs.

Every run directory gets ``config.yaml`` (the resolved config), the data
files of the experiment, and finally ``manifest.json``. The manifest is
removed before work starts and written last through an atomic rename, so its
presence means the listed files are complete. A failed run leaves
``error.json`` instead.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import constants

from .. import __version__
from ..couplings import (
    CouplingMatrix,
    LambDickeWarning,
    LightShiftParams,
    RamanConfig,
    accessible_window,
    compute_couplings,
    couplings_for_alpha,
    detuning_for_range,
    fit_power_law,
    fourth_order_shift,
    power_law_matrix,
)
from ..errors import ConfigError, FitError, IontfimError, NumericError
from ..experiments import (
    DisorderEnsemble,
    combine_scans,
    cumulative_average,
    dtc_phase_scan,
    hamming_distance,
    neel_pattern,
    position_observable,
    run_dtc,
    run_mbl_quench,
    run_prethermal,
    run_spectroscopy,
    sample_shots,
    synthetic_splittings,
)
from ..hilbert import Propagator
from ..ionchain import TrapConfig, chain_modes
from .config import RunConfig, config_dict, config_hash, dump_config

TWO_PI = 2 * math.pi
MHZ = TWO_PI * 1e6
MANIFEST = "manifest.json"
ERROR = "error.json"
# SeedSequence stream tag for shot sampling, kept apart from disorder draws
SHOT_STREAM = 1


def _plain(x):
    """JSON-ready copy with numpy scalars unwrapped and non-finite floats as null."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


@dataclass
class Writer:
    """Single writer for a run directory; records every file it produces."""

    out: Path
    files: list = field(default_factory=list)

    def _record(self, name: str, data: bytes) -> None:
        (self.out / name).write_bytes(data)
        self.files.append({"name": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})

    def csv(self, name: str, header: list, rows) -> None:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        lines = [",".join(header)]
        lines += [",".join("%.17g" % v for v in row) for row in rows]
        self._record(name, ("\n".join(lines) + "\n").encode())

    def json(self, name: str, obj) -> None:
        self._record(name, (json.dumps(_plain(obj), indent=2) + "\n").encode())

    def text(self, name: str, text: str) -> None:
        self._record(name, text.encode())


def _trap(n: int, p) -> TrapConfig:
    return TrapConfig(n, p.axial_mhz * MHZ, p.transverse_mhz * MHZ, mass=p.mass_amu * constants.atomic_mass)


def _propagator(cfg) -> Propagator:
    p = cfg.propagator
    return Propagator(method=p.method, krylov_dim=p.krylov_dim, tol=p.tol, steps_per_unit=p.steps_per_unit)


def build_couplings(cfg) -> tuple[CouplingMatrix, dict]:
    """Coupling matrix in units of ``J0`` for a chain config, plus a description."""
    src = cfg.couplings
    if src.source == "trap":
        j, fit, raman = couplings_for_alpha(_trap(cfg.n, src.trap), cfg.alpha)
        info = {"source": "trap", "alpha_fit": fit.alpha, "fit_residual": fit.residual, "j0_rad_s": fit.j0, "beatnote_rad_s": raman.beatnote}
    elif src.source == "power_law":
        j = power_law_matrix(cfg.n, cfg.alpha)
        info = {"source": "power_law", "alpha": cfg.alpha}
    else:
        try:
            j = CouplingMatrix(np.array(src.matrix, dtype=float)).in_units_of_j0()
        except ValueError as e:
            raise ConfigError(f"invalid value for couplings.matrix: {e}") from None
        info = {"source": "matrix"}
        try:
            info["alpha_fit"] = fit_power_law(j).alpha
        except FitError:
            pass
    info["matrix"] = j.values
    return j, info


def _sites(prefix: str, n: int) -> list:
    return [f"{prefix}_{i}" for i in range(1, n + 1)]


def _shot_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, k, SHOT_STREAM])))


def run_modes(cfg, w: Writer, map_fn) -> list:
    trap = _trap(cfg.n, cfg.trap)
    eq, modes = chain_modes(trap)
    idx = np.arange(1, cfg.n + 1)
    w.csv("positions.csv", ["ion", "position", "position_m"], np.column_stack([idx, eq.positions, eq.physical]))
    rows = np.column_stack([idx, modes.frequencies, modes.frequencies / MHZ, modes.eigenvectors.T])
    w.csv("modes.csv", ["mode", "omega_rad_s", "freq_mhz"] + _sites("b", cfg.n), rows)
    w.json(
        "summary.json",
        {"n": cfg.n, "com_frequency_rad_s": modes.com_frequency, "aspect_ratio": trap.aspect_ratio, "length_scale_m": trap.length_scale},
    )
    return []


def run_couplings(cfg, w: Writer, map_fn) -> list:
    trap = _trap(cfg.n, cfg.trap)
    _, modes = chain_modes(trap)
    template = RamanConfig(rabi_freq=cfg.rabi_mhz * MHZ, beatnote=cfg.beatnote_mhz * MHZ if cfg.beatnote_mhz else trap.transverse_freq)
    raman = template if cfg.alpha is None else detuning_for_range(trap, template, cfg.alpha)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", LambDickeWarning)
        j = compute_couplings(raman, modes, mass=trap.mass)
    summary = {
        "beatnote_rad_s": raman.beatnote,
        "detuning_from_com_rad_s": raman.beatnote - modes.com_frequency,
        "lamb_dicke_max": float(raman.lamb_dicke(trap.mass, modes.frequencies).max()),
        "warnings": [str(c.message) for c in caught],
    }
    if cfg.n >= 3:
        fit = fit_power_law(j)
        summary["fit"] = {"j0_rad_s": fit.j0, "alpha": fit.alpha, "residual": fit.residual}
        summary["accessible_window"] = accessible_window(fit)
    if cfg.light_shift is not None:
        ls = cfg.light_shift
        summary["light_shift"] = fourth_order_shift(LightShiftParams(ls.g0_mhz * MHZ, ls.delta_mhz * MHZ, ls.delta2_mhz * MHZ, ls.qubit_mhz * MHZ))
    header = _sites("j", cfg.n)
    w.csv("couplings.csv", header, j.values)
    w.csv("couplings_j0.csv", header, j.in_units_of_j0().values)
    w.json("summary.json", summary)
    return []


def run_mbl(cfg, w: Writer, map_fn) -> list:
    j, info = build_couplings(cfg)
    ens = DisorderEnsemble(cfg.width, cfg.n_realizations, cfg.seed)
    res = run_mbl_quench(j, cfg.b_field, ens, cfg.t_max, cfg.n_times, steady_from=cfg.steady_from, prop=_propagator(cfg), map_fn=map_fn)
    header = ["t"] + _sites("sz", cfg.n) + ["hamming"]
    pattern = neel_pattern(cfg.n)
    window = res.times >= cfg.steady_from
    per_real, hds, all_mags = [], [], []
    for k, q in enumerate(res.realizations):
        mags = q.magnetizations
        if cfg.shots:
            mags = sample_shots(mags, cfg.shots, _shot_rng(cfg.seed, k))
        hd = hamming_distance(mags, pattern)
        hds.append(hd)
        all_mags.append(mags)
        per_real.append(float(hd[window].mean()))
        w.csv(f"realization_{k:03d}.csv", header, np.column_stack([q.times, mags, hd]))
    hds = np.array(hds)
    mean_hd = hds.mean(axis=0)
    stderr = hds.std(axis=0, ddof=1) / math.sqrt(len(hds)) if len(hds) > 1 else np.zeros_like(mean_hd)
    mean_mags = np.mean(all_mags, axis=0)
    w.csv("mean.csv", header + ["hamming_stderr"], np.column_stack([res.times, mean_mags, mean_hd, stderr]))
    # seeds are exact in the manifest; a float column would round them
    w.csv("disorder.csv", ["realization"] + _sites("D", cfg.n), np.column_stack([np.arange(len(ens.seeds)), ens.realizations(cfg.n)]))
    steady = float(mean_hd[window].mean())
    per_real = np.array(per_real)
    w.json(
        "summary.json",
        {
            "steady_state_hd": steady,
            "steady_state_stderr": float(per_real.std(ddof=1) / math.sqrt(len(per_real))) if len(per_real) > 1 else 0.0,
            "steady_state_per_realization": per_real,
            "couplings": info,
        },
    )
    return ens.seeds


def _initial_label(initial) -> str:
    return initial if isinstance(initial, str) else "sites_" + "_".join(str(s) for s in initial)


def run_pretherm(cfg, w: Writer, map_fn) -> list:
    j, info = build_couplings(cfg)
    prop = _propagator(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        results = list(map_fn(lambda ini: run_prethermal(j, cfg.b_field, ini, cfg.t_max, cfg.n_times, prop=prop), cfg.initial))
    summary = {"couplings": info, "warnings": sorted({str(c.message) for c in caught}), "initial_states": {}}
    header = ["t"] + _sites("sz", cfg.n) + ["C", "C_avg"]
    for k, (ini, r) in enumerate(zip(cfg.initial, results)):
        label = _initial_label(ini)
        mags, c, c_avg = r.magnetizations, r.c_of_t, r.c_avg
        if cfg.shots:
            mags = sample_shots(mags, cfg.shots, _shot_rng(cfg.seed, k))
            c = position_observable(mags)
            c_avg = cumulative_average(r.times, c)
        w.csv(f"{label}.csv", header, np.column_stack([r.times, mags, c, c_avg]))
        s0 = np.sign(c[0])
        summary["initial_states"][label] = {
            "up_sites": r.up_sites,
            "c0": c[0],
            "c_avg_final": c_avg[-1],
            "sign_preserved": bool(s0 != 0 and np.all(np.sign(c_avg) == s0)),
        }
    w.json("summary.json", summary)
    return []


def run_dtc_kind(cfg, w: Writer, map_fn) -> list:
    j, info = build_couplings(cfg)
    ens = DisorderEnsemble(cfg.width, cfg.n_realizations, cfg.seed)
    r = run_dtc(j, cfg.epsilon, cfg.t2, ens, g=cfg.g, t1=cfg.t1, t3=cfg.t3, n_periods=cfg.n_periods, map_fn=map_fn)
    periods = np.arange(1, cfg.n_periods + 1)
    for k in range(cfg.n_realizations):
        w.csv(f"realization_{k:03d}.csv", ["period", "t"] + _sites("sx", cfg.n), np.column_stack([periods, r.times, r.magnetizations[k]]))
    site_avg = r.spectra.mean(axis=2)
    cols = [f"h_{k:03d}" for k in range(cfg.n_realizations)]
    w.csv("spectrum.csv", ["bin", "freq"] + cols + ["h_mean"], np.column_stack([np.arange(cfg.n_periods), r.freqs, site_avg.T, r.mean_spectrum]))
    d = r.drive
    w.json(
        "summary.json",
        {
            "drive": {"g": d.g, "epsilon": d.epsilon, "t1": d.t1, "t2": d.t2, "t3": d.t3, "period": d.period},
            "tc_bin": r.tc_bin,
            "peak_bin": r.peak_bin,
            "locked": r.locked,
            "peak_height": r.peak_height,
            "peak_variance": r.peak_variance,
            "peak_heights": r.peak_heights,
            "couplings": info,
        },
    )
    return ens.seeds


def run_dtc_scan_kind(cfg, w: Writer, map_fn) -> list:
    j, info = build_couplings(cfg)
    ens = DisorderEnsemble(cfg.width, cfg.n_realizations, cfg.seed)
    r = dtc_phase_scan(j, cfg.epsilons, cfg.t2_values, ens, g=cfg.g, n_periods=cfg.n_periods, map_fn=map_fn)
    a, b = np.meshgrid(np.arange(r.epsilons.size), np.arange(r.t2_values.size), indexing="ij")
    a, b = a.ravel(), b.ravel()
    w.csv("scan.csv", ["epsilon", "t2", "peak_height", "peak_variance"], np.column_stack([r.epsilons[a], r.t2_values[b], r.peak_height[a, b], r.peak_variance[a, b]]))
    w.json(
        "summary.json",
        {
            "t2_values": r.t2_values,
            "eps_star": r.eps_star,
            "flat": r.flat,
            "slope": r.slope,
            "slope_stderr": r.slope_stderr,
            "intercept": r.intercept,
            "couplings": info,
        },
    )
    return ens.seeds


def _label_str(label) -> str:
    return f"dE_{label[0]}" if len(label) == 1 else f"dE_{label[1]}|{label[0]}"


def run_spectroscopy_kind(cfg, w: Writer, map_fn) -> list:
    j, info = build_couplings(cfg)
    probe = cfg.probe.values()
    sets = [()] + [(i,) for i in range(1, cfg.n)] if cfg.conditional else [tuple(cfg.flipped)]
    prop = _propagator(cfg)
    scans = list(
        map_fn(lambda fl: run_spectroscopy(j, probe, b0=cfg.b0, bp=cfg.bp, duration=cfg.duration, flipped=fl, prop=prop), sets)
    )
    summary: dict = {"couplings": info, "scans": []}
    for fl, s in zip(sets, scans):
        name = "scan.csv" if not fl else "scan_flip_" + "_".join(map(str, fl)) + ".csv"
        w.csv(name, ["omega_p", "response"], np.column_stack([s.probe_freqs, s.response]))
        summary["scans"].append(
            {
                "file": name,
                "flipped": fl,
                "resolution": s.resolution,
                "peaks": s.peaks,
                "lines": [
                    {"frequency": e.frequency, "height": e.height, "status": e.status, "splittings": {_label_str(k): v for k, v in e.values.items()}}
                    for e in s.extracted_splittings
                ],
                "unresolved": [[_label_str(x) if isinstance(x, tuple) else x for x in g] for g in s.unresolved],
                "unassigned": s.unassigned,
            }
        )
    pooled = {}
    for s in scans:
        for lab, v in s.splittings.items():
            pooled.setdefault(lab, v)
    exact = synthetic_splittings(j, pooled) if pooled else {}
    summary["splittings"] = {_label_str(k): {"measured": v, "model": exact[k]} for k, v in sorted(pooled.items())}
    try:
        _, rec = combine_scans(scans, cfg.n)
    except (IontfimError, ValueError) as e:
        summary["reconstructed"] = None
        summary["reconstruction_error"] = str(e)
    else:
        summary["reconstructed"] = rec.values
        summary["max_abs_error"] = float(np.max(np.abs(rec.values - j.values)))
        w.csv("reconstructed.csv", _sites("j", cfg.n), rec.values)
    w.json("summary.json", summary)
    return []


RUNNERS = {
    "modes": run_modes,
    "couplings": run_couplings,
    "mbl": run_mbl,
    "pretherm": run_pretherm,
    "dtc": run_dtc_kind,
    "dtc-scan": run_dtc_scan_kind,
    "spectroscopy": run_spectroscopy_kind,
}


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, NumericError):
        return 3
    if isinstance(exc, (ConfigError, ValueError)):
        return 2
    return 1


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def run(config: RunConfig, out: str | Path, threads: int = 1) -> dict:
    """Run ``config`` into directory ``out`` with a pool of ``threads`` workers.

    Returns the manifest. On failure ``error.json`` is written and the
    exception re-raised.
    """
    if threads < 1:
        raise ConfigError(f"invalid value for threads: {threads} (must be >= 1)")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for stale in (MANIFEST, ERROR):
        (out / stale).unlink(missing_ok=True)
    writer = Writer(out)
    start = time.perf_counter()
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        writer.text("config.yaml", dump_config(config))
        seeds = RUNNERS[config.kind](config, writer, pool.map if pool else map)
    except BaseException as e:
        _write_atomic(out / ERROR, json.dumps({"error": type(e).__name__, "message": str(e), "exit_code": exit_code(e)}, indent=2) + "\n")
        raise
    finally:
        if pool:
            pool.shutdown()
    manifest = {
        "tool": "iontfim",
        "version": __version__,
        "kind": config.kind,
        "config_hash": config_hash(config),
        "seed": config.seed,
        "threads": threads,
        "wall_clock_seconds": time.perf_counter() - start,
        "realization_seeds": seeds,
        "files": writer.files,
        "config": config_dict(config),
    }
    _write_atomic(out / MANIFEST, json.dumps(_plain(manifest), indent=2) + "\n")
    return manifest
