"""Dirichlet cones, product cones and harmonic interpolation of convex data, checked on grids."""
from .blockprod import BlockSym, product_contains, product_contains_sampled
from .cones import DirichletSet, contains, pos_cone, trace_cone
from .convex import ConvexBody, legendre, mollify, sup_convolution
from .grid import Axis, GridFn
from .harmonic import Domain, harmonic_measure, solve_dirichlet
from .interpolate import (
    BoundaryBodyFamily, BoundaryFunctionFamily, envelope_property_check, interpolate_bodies,
    interpolate_functions,
)
from .prekopa import marginal, min_principle, section_volume
from .verify import CheckReport, is_convex, is_F_subharmonic, is_product_subharmonic

__version__ = "0.1.0"

__all__ = [
    "Axis", "BlockSym", "BoundaryBodyFamily", "BoundaryFunctionFamily", "CheckReport", "ConvexBody",
    "DirichletSet", "Domain", "GridFn", "contains", "envelope_property_check", "harmonic_measure",
    "interpolate_bodies", "interpolate_functions", "is_F_subharmonic", "is_convex",
    "is_product_subharmonic", "legendre", "marginal", "min_principle", "mollify", "pos_cone",
    "product_contains", "product_contains_sampled", "section_volume", "solve_dirichlet",
    "sup_convolution", "trace_cone",
]
