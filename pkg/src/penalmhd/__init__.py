"""Desk-scale simulator for a rigid insulating body in a conducting fluid.

The package advances a Rothe-discretized, regularized and
Brinkman-penalized system on a uniform box grid: implicit density
transport, penalized momentum with Leray projection, a regularized
induction equation, exact rigid-body kinematics, and an energy/invariant
audit of every step.
"""

from .grid import Grid, ScalarField, VectorField

__version__ = "0.1.0"

__all__ = ["Grid", "ScalarField", "VectorField", "__version__"]
