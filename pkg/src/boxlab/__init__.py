"""Exact certification of de Finetti bounds, threshold bounds and channel
distances for nonlocal boxes."""

__version__ = "0.1.0"
