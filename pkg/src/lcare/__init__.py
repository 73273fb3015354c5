"""Localized CARE: adaptive expectile tail risk and TIPP portfolio insurance."""

__version__ = "0.1.0"
