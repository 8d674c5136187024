"""Explainable crater detection and lunar landing navigation, desk scale."""

__version__ = "0.1.0"
