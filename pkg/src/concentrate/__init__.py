"""Numerical verification toolkit for two-level concentration of convex functions."""
from .cost import INF, CostPair, conjugate_numeric, dlstar, h, lstar
from .measure import MeasureSpec, load_spec

__version__ = "0.1.0"

__all__ = ["INF", "CostPair", "MeasureSpec", "conjugate_numeric", "dlstar", "h", "load_spec", "lstar", "__version__"]
