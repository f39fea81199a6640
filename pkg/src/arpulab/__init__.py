"""Reliable and probably useful active learning of halfspaces with noisy
label and comparison oracles."""

__version__ = "0.1.0"
