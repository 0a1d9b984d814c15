"""Numerical toolkit for Gaussian bounds of Schrödinger heat kernels."""

__version__ = "0.1.0"
