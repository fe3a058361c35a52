"""Landmark-based happiness/neutral emotion recognition pipeline."""

__version__ = "0.1.0"
