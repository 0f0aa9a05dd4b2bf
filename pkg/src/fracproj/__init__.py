"""Numerical laboratory for entropy and dimension of self-similar measures and their projections."""

__version__ = "0.1.0"
