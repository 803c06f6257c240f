"""
Stochastic LQG Balancer - model reduction for controlled linear systems
with multiplicative noise.

Computes the stochastic LQG Gramian pair, balances and truncates, and
certifies the reduced model with error bounds, preservation checks and
moment or Monte Carlo simulations of the error systems.
"""

__version__ = "0.1.0"
__author__ = "Stochastic LQG Balancer Team"
