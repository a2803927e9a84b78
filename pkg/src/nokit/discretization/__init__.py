"""Domains, point clouds with quadrature weights, integration and refinement."""
from .core import Discretization, Domain, Field, RefinementChain
from .delaunay import delaunay_weights_2d, hull_area, triangulate
from .quadrature import (
    integrate,
    monte_carlo_weights,
    point_cloud,
    refine,
    riemann_weights_1d,
    subsample,
    uniform_grid,
)

__all__ = [
    "Discretization", "Domain", "Field", "RefinementChain",
    "delaunay_weights_2d", "hull_area", "triangulate",
    "integrate", "monte_carlo_weights", "point_cloud", "refine",
    "riemann_weights_1d", "subsample", "uniform_grid",
]
