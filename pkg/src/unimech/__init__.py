"""Symbolic-numeric engine for higher-order Lagrangian mechanics in the unified formalism."""

__version__ = "0.1.0"
