"""Numerical laboratory for 2D Euler flow through rows of small inclusions."""
from .geometry import InclusionShape, PorousLayout, gap_area, make_layout, make_shape, optimal_strip

__all__ = ["InclusionShape", "PorousLayout", "gap_area", "make_layout", "make_shape", "optimal_strip"]
__version__ = "0.1.0"
