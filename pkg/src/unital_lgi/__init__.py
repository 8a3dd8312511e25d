"""Leggett-Garg K3 for two-level systems under unital Markovian dynamics."""

__version__ = "0.1.0"
