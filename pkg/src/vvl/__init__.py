"""Vanishing-viscosity laboratory for 2D Navier-Stokes on the torus."""

__version__ = "0.1.0"
