"""Martingale type/cotype, uniform smoothness/convexity and renorming on
finite-dimensional normed spaces."""

__version__ = "0.1.0"
