"""Calogero-Moser spin flow on the N-point circle and its half-wave-maps limit."""

__version__ = "0.1.0"
