"""Finite-N kernels and hard-edge limits of coupled Wishart-type product ensembles."""

__version__ = "0.1.0"
