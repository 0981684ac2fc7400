"""Privacy-preserving synthetic trajectory generation and evaluation."""

__version__ = "0.1.0"
