"""Vine-copula scenario generation and two-stage stochastic portfolio
optimization with a currency overlay, CVaR objective, and GA solver."""

__version__ = "0.1.0"

from .errors import VinefolioError  # noqa: F401
