"""Discrete-event simulator of DASH streaming through a forecast-driven edge cache."""

__version__ = "0.1.0"
