"""Weights for discrete higher-order Hardy-type inequalities in l^p, with numerical checks."""

__version__ = "0.1.0"
