"""Numerical workbench for exponential-family regression and its Gaussian accompanying experiments."""

__version__ = "0.1.0"
SCHEMA_VERSION = 1
