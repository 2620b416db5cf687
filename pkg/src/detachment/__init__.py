"""Exact analytics and Monte Carlo simulation of the detachment process."""

__version__ = "0.1.0"
