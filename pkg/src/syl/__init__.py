"""Negative-cone sigma_k-Yamabe solutions with hypersurface singularities."""

__version__ = "0.1.0"
