"""Numerical checks of genericity for linearly perturbed composites ``(F + pi) o f``."""

__version__ = "0.1.0"
