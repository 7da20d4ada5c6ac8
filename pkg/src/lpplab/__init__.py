"""Simulation and verification lab for exponential last-passage percolation."""

from .analytic import BoundaryParam, DomainError, NoSolutionError, Partition, PlanePoint
from .lpp import Variant, lpp_values
from .randfield import SeedSpec, WeightField, sample_field

__version__ = "0.1.0"

__all__ = [
    "BoundaryParam",
    "DomainError",
    "NoSolutionError",
    "Partition",
    "PlanePoint",
    "SeedSpec",
    "Variant",
    "WeightField",
    "lpp_values",
    "sample_field",
    "__version__",
]
