"""Pseudo-spectral toolkit for the periodic fractional Boussinesq system in Sobolev-Gevrey norms."""

__version__ = "0.1.0"
