"""Predictive modelling for zero-inflated (limited) targets ``y = c * a``."""

__version__ = "0.1.0"
