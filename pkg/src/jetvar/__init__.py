"""Symbolic variational calculus on jet spaces with parametrized variations."""

__version__ = "0.1.0"
