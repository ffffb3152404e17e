"""Thermodynamic-formalism toolkit for Lorenz-like expanding maps."""
from .lorenz_map import LorenzMap, PeriodicOrbit, affine, doubling

__all__ = ["LorenzMap", "PeriodicOrbit", "affine", "doubling"]
