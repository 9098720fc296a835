"""Trajectory simulation of leakage in a repeated two-qutrit sigma^z measurement."""

__version__ = "0.1.0"
