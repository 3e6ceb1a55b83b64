"""Evolutionary quantum architecture search with QFIM-based pruning."""

__version__ = "0.1.0"
