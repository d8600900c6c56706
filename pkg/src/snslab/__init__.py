"""snslab: a desk-scale laboratory for stochastic Navier-Stokes discretisations.

Spectral Galerkin and Taylor-Hood finite element backends for the 3D periodic
incompressible problem driven by truncated cylindrical noise, with semi-implicit
time stepping, blow-up stopping indices, and Monte Carlo rate experiments.
"""

__version__ = "0.1.0"
