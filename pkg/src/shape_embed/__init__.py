"""Neighbor-embedding optimizer with interchangeable attraction and repulsion shapes."""

__version__ = "0.1.0"
