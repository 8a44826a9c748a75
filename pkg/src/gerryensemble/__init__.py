"""Score-based MCMC ensembles of district plans and the indices computed against them."""

__version__ = "0.1.0"
