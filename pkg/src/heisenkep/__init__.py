"""Symbolic-numeric integrability analysis of the Kepler and two-body
problems on the Heisenberg group."""

__version__ = "0.1.0"
