"""Staged transfer-learning trainer for honeycomb patch classifiers."""

__version__ = "0.1.0"


class TrainkitError(Exception):
    """Base class for all errors raised by this package."""
