"""Stochastic mean-payoff games with perfect information (BWR-games)."""
