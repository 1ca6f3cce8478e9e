"""Entanglement of dipole-coupled spin chains driven by rectangular RF pulses."""

__version__ = "0.1.0"
