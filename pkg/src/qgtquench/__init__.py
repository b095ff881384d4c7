"""Quench-based extraction of the non-Abelian quantum metric and monopole Chern numbers."""

__version__ = "0.1.0"
