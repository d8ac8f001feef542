"""Bloch bands of the 1D fractional Schrodinger equation in periodic rectangular potentials."""

__version__ = "0.1.0"
