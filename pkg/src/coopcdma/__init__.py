"""Blind joint interference suppression and power allocation for cooperative DS-CDMA."""

__version__ = "0.1.0"
