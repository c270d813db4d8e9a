"""Operator norms of random symmetric Toeplitz matrices, at scale."""

__version__ = "0.1.0"
