"""Physical constants and regularization knobs shared by the solvers."""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["MaterialParams"]


@dataclass(frozen=True)
class MaterialParams:
    """Fluid/electromagnetic constants and the three approximation knobs.

    sigma:       electrical conductivity of the fluid (> 0; the solid is
                 insulating and handled through ``kappa_solid``)
    mu:          magnetic permeability, constant across fluid and solid
    nu:          kinematic viscosity
    rho_min/max: admissible density band, 0 < rho_min <= rho_max
    eps:         regularization weight (density diffusion, velocity
                 biharmonic, the two curl terms of the induction step)
    eta:         rigid-body penalization weight
    kappa_solid: resistivity-contrast factor in (0, 1]; the solid
                 diffusivity is scaled by 1/kappa_solid to drive curl B
                 to zero inside the body
    """

    sigma: float
    mu: float
    nu: float
    rho_min: float
    rho_max: float
    eps: float
    eta: float
    kappa_solid: float = 1e-3

    def __post_init__(self):
        for name in ("sigma", "mu", "nu", "rho_min", "rho_max", "eta"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.eps < 0.0:
            raise ValueError("eps must be nonnegative")
        if self.rho_min > self.rho_max:
            raise ValueError("rho_min must not exceed rho_max")
        if not 0.0 < self.kappa_solid <= 1.0:
            raise ValueError("kappa_solid must lie in (0, 1]")
