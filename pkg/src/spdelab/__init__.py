"""Monte Carlo laboratory for the stochastic heat equation with power-law
noise on the unit circle."""

__version__ = "0.1.0"
