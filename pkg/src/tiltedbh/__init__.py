"""Tilted Bose-Hubbard chain: TEBD simulability analysis and Floquet spectral
statistics."""

__version__ = "0.1.0"
