"""Spin-1/2 chain states, Hamiltonians and propagation."""

from .operators import (
    HamiltonianSpec,
    IsingXX,
    ModulatedField,
    SiteFields,
    UniformField,
    apply_hamiltonian,
    expectation,
    matvec,
    to_dense,
)
from .propagate import DEFAULT as DEFAULT_PROPAGATOR
from .propagate import Propagator, evolve, evolve_many, evolve_times, krylov_expm, step_count, taylor_expm
from .state import SpinState, basis_state, build_state, expect_local, magnetizations, measure, neel_spec

__all__ = [
    "DEFAULT_PROPAGATOR",
    "HamiltonianSpec",
    "IsingXX",
    "ModulatedField",
    "Propagator",
    "SiteFields",
    "SpinState",
    "UniformField",
    "apply_hamiltonian",
    "basis_state",
    "build_state",
    "evolve",
    "evolve_many",
    "evolve_times",
    "expect_local",
    "expectation",
    "krylov_expm",
    "magnetizations",
    "matvec",
    "measure",
    "neel_spec",
    "step_count",
    "taylor_expm",
    "to_dense",
]
