"""Stochastic mean-field wave equations with an exact stochastic interaction term."""

__version__ = "0.1.0"
