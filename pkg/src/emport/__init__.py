"""Entropy-regularized exploratory portfolio choice under stochastic volatility."""

__version__ = "0.1.0"
