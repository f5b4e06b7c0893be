"""End-to-end protocols: MBL quench, prethermalization, time crystal, spectroscopy."""

from .disorder import DisorderEnsemble, realization_seed
from .dtc import DtcResult, FloquetDrive, PhaseScanResult, dtc_phase_scan, run_dtc, stroboscopic_series
from .mbl import MblResult, QuenchResult, mbl_hamiltonian, run_mbl_quench
from .observables import (
    cumulative_average,
    dft_magnitude,
    hamming_distance,
    neel_pattern,
    position_observable,
    position_weights,
    sample_shots,
)
from .pretherm import PrethermResult, RegimeWarning, initial_sites, run_prethermal
from .spectroscopy import (
    ExtractedSplitting,
    SpectroscopyScan,
    Transition,
    combine_scans,
    condition_number,
    default_measurement_set,
    model_transitions,
    reconstruct_couplings,
    run_spectroscopy,
    splitting_energy,
    synthetic_splittings,
)

__all__ = [
    "DisorderEnsemble",
    "DtcResult",
    "ExtractedSplitting",
    "FloquetDrive",
    "MblResult",
    "PhaseScanResult",
    "PrethermResult",
    "QuenchResult",
    "RegimeWarning",
    "SpectroscopyScan",
    "Transition",
    "combine_scans",
    "condition_number",
    "cumulative_average",
    "default_measurement_set",
    "dft_magnitude",
    "dtc_phase_scan",
    "hamming_distance",
    "initial_sites",
    "mbl_hamiltonian",
    "model_transitions",
    "neel_pattern",
    "position_observable",
    "position_weights",
    "realization_seed",
    "reconstruct_couplings",
    "run_dtc",
    "run_mbl_quench",
    "run_prethermal",
    "sample_shots",
    "splitting_energy",
    "stroboscopic_series",
    "synthetic_splittings",
]
