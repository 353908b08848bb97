"""Rotationally symmetric magnetic systems on the two-sphere."""

__version__ = "0.1.0"
