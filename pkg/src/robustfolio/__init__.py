"""Robust (multi-prior) expected-utility portfolio choice on finite markets."""

__version__ = "0.1.0"
