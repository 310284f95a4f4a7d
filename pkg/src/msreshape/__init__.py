"""Noisy Molmer-Sorensen gate channels and noise reshaping with repetition-code circuits."""

__version__ = "0.1.0"
