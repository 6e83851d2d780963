"""Numerical laboratory for the Prandtl boundary-layer equations.

Shear layers and the heat equation, the linearised per-mode problem and its
growth rates, monotone solutions through the Crocco variables, and audits of
the stability functional between nearby monotone runs.
"""

__version__ = "0.1.0"

from ._accel import backend  # noqa: E402
from .numerics import Field2D, Grid1D, PeriodicGridX, WeightedNormSpec, build_grid, weighted_norm  # noqa: E402

__all__ = [
    "Field2D",
    "Grid1D",
    "PeriodicGridX",
    "WeightedNormSpec",
    "backend",
    "build_grid",
    "weighted_norm",
]
