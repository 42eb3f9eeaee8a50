"""Heterogeneous league training for a two-player fighting game."""

__version__ = "0.1.0"
