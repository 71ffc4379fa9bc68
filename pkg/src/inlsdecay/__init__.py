"""Simulation and verification toolkit for 1D inhomogeneous NLS decay results."""

__version__ = "0.1.0"
