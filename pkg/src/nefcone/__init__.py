"""Exact polyhedral-cone computations for F-nef divisors on the moduli space of stable rational curves."""

__version__ = "0.1.0"
