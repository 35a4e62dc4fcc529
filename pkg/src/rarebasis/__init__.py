"""Rotated-rectangle families separating maximal operators from Orlicz spaces."""

__version__ = "0.1.0"
