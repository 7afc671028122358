"""Computable Heisenberg-modulation spaces on R^{2n+1}."""

__version__ = "0.1.0"
