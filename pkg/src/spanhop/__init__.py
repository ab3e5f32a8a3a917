"""Curation and evaluation toolkit for multi-hop grounded video QA."""

__version__ = "0.1.0"
