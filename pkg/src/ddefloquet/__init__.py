"""Floquet spectra of periodic delay-differential solutions with large delay."""

__version__ = "0.1.0"
