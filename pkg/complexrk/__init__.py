"""Explicit Runge-Kutta methods on complex time grids."""

__version__ = "1.0.0"
