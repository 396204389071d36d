"""Numerical laboratory for blow-up of weakly coupled scale-invariant damped wave systems."""

__version__ = "0.1.0"
