"""Numerical workbench for the free-boundary compressible MHD system with
surface tension: operators, linearization, a regularized linear solver,
compatibility jets and a discretized Nash-Moser iteration."""

__version__ = "0.1.0"
