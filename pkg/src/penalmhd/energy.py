"""Per-step energy ledger and the discrete energy-inequality audit.

Every entry is the exact quadratic form of the corresponding discrete
operator, evaluated on the stored states with the same quadrature the
solvers use.  The audited inequality is the step balance

    kinetic_new + magnetic_new + dissipations
        <= kinetic_old + magnetic_old
           - penalty_work + source_work + mixed works + slack,

whose derivation drops only nonnegative terms (the density-weighted
velocity increment, the magnetic increment) and the Krylov residuals, so
it must hold to a relative slack at the solver-tolerance scale.  The two
mixed works carry the time-staggered Lorentz/induction cross terms that
cancel exactly only in the continuous-time system; their same-time
pointwise cancellation is tracked separately as ``mixed_residual``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import stencils
from .grid import ScalarField, VectorField
from .params import MaterialParams
from .state import SimState

__all__ = [
    "EnergyLedger",
    "EnergyAuditReport",
    "compute_ledger",
    "assert_energy_inequality",
    "mixed_term_residual",
    "LEDGER_COLUMNS",
]


@dataclass
class EnergyLedger:
    kinetic: float
    magnetic: float
    viscous: float
    ohmic: float
    reg_biharmonic: float
    reg_quartic: float
    reg_curl4: float
    penalty_work: float
    source_work: float
    mixed_residual: float
    kinetic_prev: float
    magnetic_prev: float
    mixed_lorentz_work: float
    mixed_induction_work: float

    def row(self) -> list[float]:
        return [getattr(self, f.name) for f in fields(self)]


LEDGER_COLUMNS = [f.name for f in fields(EnergyLedger)]


@dataclass
class EnergyAuditReport:
    passed: bool
    margin: float
    tolerance: float
    lhs: float
    rhs: float


def mixed_term_residual(u: VectorField, B: VectorField) -> float:
    """Relative residual of the pointwise cross-term identity.

    (curl B x B) . u + (u x B) . curl B vanishes algebraically; evaluating
    both triple products with the same quadrature leaves only rounding.
    """
    h = u.grid.h
    c = stencils.curl(B.values, h, "zero")
    lorentz_work = float(np.sum(stencils.cross(c, B.values) * u.values))
    induction_work = float(np.sum(stencils.cross(u.values, B.values) * c))
    return abs(lorentz_work + induction_work) / (1.0 + abs(induction_work))


def compute_ledger(
    prev: SimState,
    next_state: SimState,
    pi_prev: VectorField,
    params: MaterialParams,
    dt: float,
    g: VectorField | None = None,
    J: VectorField | None = None,
) -> EnergyLedger:
    """Assemble every term of the discrete step energy balance."""
    grid = prev.u.grid
    h, vol = grid.h, grid.cell_volume
    p = params

    def q(a: np.ndarray) -> float:
        return float(np.sum(a)) * vol

    u_new, B_new = next_state.u.values, next_state.B.values
    u_old, B_old = prev.u.values, prev.B.values
    chi_new = next_state.chi.values

    kinetic = 0.5 * q(next_state.rho.values * np.sum(u_new**2, axis=0))
    kinetic_prev = 0.5 * q(prev.rho.values * np.sum(u_old**2, axis=0))
    magnetic = q(np.sum(B_new**2, axis=0)) / (2.0 * p.mu)
    magnetic_prev = q(np.sum(B_old**2, axis=0)) / (2.0 * p.mu)

    # viscous dissipation: quadratic form of -2 nu div(sym grad .)
    gu = [stencils.grad(u_new[i], h, "zero") for i in range(3)]
    visc_density = np.zeros_like(u_new[0])
    for i in range(3):
        for a in range(3):
            d_ia = 0.5 * (gu[i][a] + gu[a][i])
            visc_density += d_ia * gu[i][a]
    viscous = 2.0 * p.nu * dt * q(visc_density)

    curl_new = stencils.curl(B_new, h, "zero")
    curl_old = stencils.curl(B_old, h, "zero")
    curl2_new = np.sum(curl_new**2, axis=0)
    alpha = (1.0 + chi_new * (1.0 / p.kappa_solid - 1.0)) / (p.sigma * p.mu)
    ohmic = dt / p.mu * q(alpha * curl2_new)

    reg_biharmonic = p.eps * dt * q(np.sum(stencils.laplacian(u_new, h, "zero") ** 2, axis=0))
    reg_quartic = p.eps / p.mu**3 * dt * q(curl2_new**2)
    cc_new = stencils.curl(curl_new, h, "zero")
    reg_curl4 = p.eps / p.mu * dt * q(np.sum(cc_new**2, axis=0))

    penalty_field = prev.rho.values * chi_new * (u_old - pi_prev.values) / p.eta
    penalty_work = dt * q(np.sum(penalty_field * u_new, axis=0))

    source_work = 0.0
    if g is not None:
        source_work += dt * q(prev.rho.values * np.sum(g.values * u_new, axis=0))
    if J is not None:
        source_work += dt / (p.sigma * p.mu) * q(np.sum(J.values * curl_new, axis=0))

    mixed_lorentz_work = dt / p.mu * q(
        np.sum(stencils.cross(curl_old, B_old) * u_new, axis=0)
    )
    mixed_induction_work = dt / p.mu * q(
        np.sum(stencils.cross(u_new, B_old) * curl_new, axis=0)
    )

    return EnergyLedger(
        kinetic=kinetic,
        magnetic=magnetic,
        viscous=viscous,
        ohmic=ohmic,
        reg_biharmonic=reg_biharmonic,
        reg_quartic=reg_quartic,
        reg_curl4=reg_curl4,
        penalty_work=penalty_work,
        source_work=source_work,
        mixed_residual=mixed_term_residual(next_state.u, next_state.B),
        kinetic_prev=kinetic_prev,
        magnetic_prev=magnetic_prev,
        mixed_lorentz_work=mixed_lorentz_work,
        mixed_induction_work=mixed_induction_work,
    )


def assert_energy_inequality(ledger: EnergyLedger, rel_tol: float = 1e-9) -> EnergyAuditReport:
    """Check the step energy balance; tolerance scales with the energy.

    Also enforces the ledger sign invariants: stored energies are
    nonnegative and every dissipation entry sits above the rounding
    floor, so a corrupted entry fails even when it would loosen the
    inequality itself.
    """
    lhs = (
        ledger.kinetic
        + ledger.magnetic
        + ledger.viscous
        + ledger.ohmic
        + ledger.reg_biharmonic
        + ledger.reg_quartic
        + ledger.reg_curl4
    )
    rhs = (
        ledger.kinetic_prev
        + ledger.magnetic_prev
        - ledger.penalty_work
        + ledger.source_work
        + ledger.mixed_lorentz_work
        + ledger.mixed_induction_work
    )
    scale = ledger.kinetic + ledger.magnetic + ledger.kinetic_prev + ledger.magnetic_prev
    tolerance = rel_tol * scale
    margin = rhs - lhs
    passed = margin >= -tolerance
    floor = -1e-12 * max(scale, 1e-300)
    for name in ("kinetic", "magnetic", "kinetic_prev", "magnetic_prev"):
        if getattr(ledger, name) < 0.0:
            passed = False
            margin = min(margin, getattr(ledger, name))
    for name in ("viscous", "ohmic", "reg_biharmonic", "reg_quartic", "reg_curl4"):
        value = getattr(ledger, name)
        if value < floor:
            passed = False
            margin = min(margin, value)
    return EnergyAuditReport(passed, margin, tolerance, lhs, rhs)
