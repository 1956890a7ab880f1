"""Integrated choice and latent variable model for electric-vehicle preferences."""

__version__ = "0.1.0"
