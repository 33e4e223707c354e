"""Spectra in rotationally invariant noncommutative phase space."""

__version__ = "0.1.0"
