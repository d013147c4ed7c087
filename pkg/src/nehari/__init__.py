"""Nehari-manifold analysis of a singular fractional p-Laplacian problem on (-1, 1)."""

__version__ = "0.1.0"
