"""Parameterized synthesis of token-passing processes via cutoffs and bounded synthesis."""

__version__ = "0.1.0"
