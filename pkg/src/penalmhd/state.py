"""One Rothe snapshot of the coupled system."""

from __future__ import annotations

from dataclasses import dataclass

from .grid import ScalarField, VectorField
from .rigid import RigidState

__all__ = ["SimState"]


@dataclass
class SimState:
    """Discrete solution at time k*dt: fields, body pose and indicator."""

    k: int
    t: float
    rho: ScalarField
    u: VectorField
    B: VectorField
    body: RigidState
    chi: ScalarField
