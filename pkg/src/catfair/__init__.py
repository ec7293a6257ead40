"""Latent-space attribute translation for building fairness-balanced synthetic datasets."""

__version__ = "0.1.0"
