"""Physical parameter estimation by iterated simulation and correction."""

__version__ = "0.1.0"
