"""Quantized cooperative stabilization and inter-agent observation toolkit."""

__version__ = "0.1.0"
