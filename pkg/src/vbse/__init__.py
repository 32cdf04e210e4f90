"""Variational basis-state encoding for electron-phonon simulation."""

__version__ = "0.1.0"
