"""Nonlinear Dirac and Schroedinger bound states on noncompact metric graphs."""

__version__ = "0.1.0"
