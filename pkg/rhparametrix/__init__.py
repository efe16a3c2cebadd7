"""Top-level package for rhparametrix."""

__version__ = "0.1.0"
