"""Fractional-order activation functions built on a truncated Grunwald-Letnikov operator."""

__version__ = "0.1.0"
