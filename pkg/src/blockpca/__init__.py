"""Spectral method for block-structured spiked Wigner models."""

__version__ = "0.1.0"
