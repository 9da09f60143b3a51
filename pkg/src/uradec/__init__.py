"""Multiuser decoding for coded compressed-sensing unsourced random access."""

__version__ = "0.1.0"
