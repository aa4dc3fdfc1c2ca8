"""Exact diagonalization and scaling analysis of the Rabi-Stark model near |U| = omega."""

__version__ = "0.1.0"
