"""Reference-driven manga colorization toolkit."""

__version__ = "0.1.0"
