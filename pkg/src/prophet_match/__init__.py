"""Vertex-price prophet inequality for Bayesian bipartite matching with edge arrivals."""

__version__ = "0.1.0"
