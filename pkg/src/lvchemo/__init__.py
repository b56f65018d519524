"""Numerical laboratory for two-species chemotaxis with Lotka-Volterra competition."""

__version__ = "0.1.0"
