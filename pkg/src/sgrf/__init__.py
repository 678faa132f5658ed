"""Isotropic Gaussian random fields on the unit sphere.

Truncated spectral synthesis driven by an angular power spectrum, covariance
kernel and regularity diagnostics, lognormal transforms, an exact spectral
solver for the additive-noise stochastic heat equation, and a convergence
experiment harness.
"""

__version__ = "0.1.0"
