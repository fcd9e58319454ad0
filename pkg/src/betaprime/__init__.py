"""Monte Carlo laboratory for beta-prime and half-sphere random polytopes."""

__version__ = "0.1.0"
