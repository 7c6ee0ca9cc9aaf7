"""Exact and Monte Carlo laboratory for pre- and post-selected measurement sequences."""

__version__ = "0.1.0"
