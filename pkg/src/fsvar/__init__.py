"""Functional structural VARs for cross-sectional distributions.

Pipeline: reflected kernel densities per period, log quantile density
transform, functional principal components, a conjugate Bayesian VAR over
macro series and component scores, and distributional impulse responses
that are valid densities by construction. Functional local projections and
a simulation laboratory sit alongside.
"""

__version__ = "0.1.0"
