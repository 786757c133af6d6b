"""Pseudo-spectral solver for stationary anisotropic compressible flow on the 3-torus."""

__version__ = "0.1.0"
