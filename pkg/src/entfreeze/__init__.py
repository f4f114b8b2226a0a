"""Entanglement freezing in open spin chains."""
__version__ = "0.1.0"
