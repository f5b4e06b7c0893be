"""Exact-dynamics simulator for long-range transverse-field Ising chains of trapped ions."""

__version__ = "0.1.0"
