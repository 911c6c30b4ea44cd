"""Fractal limit sets of iterated function systems conformal on the limit set."""

__version__ = "0.1.0"
