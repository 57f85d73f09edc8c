"""Polydisperse hard rods on Z^2: renewal bounds, exact oracles and Monte Carlo samplers."""

__version__ = "0.1.0"
