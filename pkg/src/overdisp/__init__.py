"""Overdispersed count regression: Poisson mixtures, sandwich and
quasi-likelihood estimators, and a Monte Carlo comparison harness."""
__version__ = "0.1.0"
