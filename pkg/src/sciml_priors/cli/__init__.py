"""Module init code."""


__version__ = "0.1.0"
