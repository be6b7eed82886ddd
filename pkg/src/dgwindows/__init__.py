"""Exact symbolic verifier for wall-crossing kernels of graded dg algebras."""

__version__ = "0.1.0"
