"""Exact computation with s-adic valued measures on Q_p^n."""

__version__ = "0.1.0"
