"""Numerical workbench for general (alpha, beta)-metrics with a closed conformal one-form."""

__version__ = "0.1.0"
