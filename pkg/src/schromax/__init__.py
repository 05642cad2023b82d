"""Numerical lower-bound experiments for the Schrodinger maximal function."""

__version__ = "0.1.0"
