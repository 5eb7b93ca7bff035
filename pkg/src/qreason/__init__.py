"""Interpretable two-chain qualitative reasoning QA."""

__version__ = "0.1.0"
