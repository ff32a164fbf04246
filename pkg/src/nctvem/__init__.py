"""Nonconforming Trefftz virtual element solvers and dispersion analysis."""

__version__ = "0.1.0"
