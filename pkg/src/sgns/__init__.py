"""Spectral Galerkin simulator and verification harness for stochastic
incompressible Navier-Stokes with gradient-dependent multiplicative noise."""

__version__ = "0.1.0"
