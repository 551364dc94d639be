"""Riemann-Hilbert problems for planar complex vector fields with degenerate orbits."""

__version__ = "0.1.0"
