"""Numerical toolkit for local fractional operators and BMO-type spaces on the Gauss measure space."""

__version__ = "0.1.0"
