"""Density deconvolution for supersmooth targets under supersmooth noise."""

__version__ = "0.1.0"
