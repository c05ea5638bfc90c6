"""Compressed-sensing estimation and tracking of temporally correlated mmWave MIMO channels."""

__version__ = "0.1.0"
