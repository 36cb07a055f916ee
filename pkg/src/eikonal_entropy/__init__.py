"""Entropy production, Besov and kinetic diagnostics for 2D eikonal weak solutions."""

__version__ = "0.1.0"
