"""Frozen-embedding extraction into the alforge dataset-store format."""

__version__ = "0.1.0"
