"""Regularized implicit induction step and electromagnetic diagnostics.

One step solves, inside the divergence-free space with vanishing
wall-normal component,

    (B_new - B_prev)/dt + curl( a_eff curl B_new
                                + (eps/mu^2) |curl B_new|^2 curl B_new )
        + eps curlcurl(curlcurl B_new)
    = curl( u_new x B_prev + (1/sigma) J )

where a_eff = 1/(sigma mu) in fluid cells and 1/(sigma mu kappa_solid) in
solid cells.  The resistivity contrast is the grid realization of the
solid curl-free constraint: shrinking kappa_solid drives curl B to zero
inside the body, which ``solid_curl_residual`` audits.

The quartic term is frozen at the previous Picard iterate, so each pass
is a symmetric positive definite solve (CG).  Every operator is built
from the self-adjoint zero-extension curl, making the magnetic energy
identity of the audit exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from . import stencils
from .grid import Grid, ScalarField, VectorField
from .params import MaterialParams
from .projection import KroneckerSolve, projector_for
from .solvers import LinearOperator, SolveReport, SolverError, solve_cg

__all__ = [
    "InductionStepInputs",
    "InductionReport",
    "solve_induction_step",
    "solid_curl_residual",
    "mollify_forcing",
    "reconstruct_em",
]


@dataclass
class InductionStepInputs:
    B_prev: VectorField
    u_new: VectorField
    chi_new: ScalarField
    J: VectorField
    params: MaterialParams
    dt: float

    def validate(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        chi = self.chi_new.values
        if not np.all((chi == 0.0) | (chi == 1.0)):
            raise ValueError("indicator field must be 0/1 valued")


@dataclass
class InductionReport(SolveReport):
    picard_iterations: int = 0
    picard_deltas: list[float] = field(default_factory=list)


def solve_induction_step(
    inputs: InductionStepInputs,
    tol: float = 1e-9,
    picard_max: int = 30,
    picard_tol: float = 1e-12,
    max_iter: int = 800,
) -> tuple[VectorField, InductionReport]:
    """Advance the magnetic induction by one implicit regularized step."""
    inputs.validate()
    grid = inputs.B_prev.grid
    h, dt = grid.h, inputs.dt
    p = inputs.params
    proj = projector_for(grid, "magnetic")
    mask = proj.mask

    alpha_fluid = 1.0 / (p.sigma * p.mu)
    alpha = alpha_fluid * (1.0 + inputs.chi_new.values * (1.0 / p.kappa_solid - 1.0))
    quartic_scale = p.eps / p.mu**2

    def make_apply(w_frozen: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        coeff = alpha + w_frozen

        def apply(B: np.ndarray) -> np.ndarray:
            out = B / dt
            out += stencils.curl(coeff * stencils.curl(B, h, "zero"), h, "zero")
            if p.eps > 0.0:
                cc = stencils.curl(stencils.curl(B, h, "zero"), h, "zero")
                out += p.eps * stencils.curl(stencils.curl(cc, h, "zero"), h, "zero")
            return proj.project_only(mask * out)

        return apply

    rhs_raw = inputs.B_prev.values / dt
    rhs_raw = rhs_raw + stencils.curl(
        stencils.cross(inputs.u_new.values, inputs.B_prev.values), h, "zero"
    )
    rhs_raw = rhs_raw + stencils.curl(inputs.J.values / p.sigma, h, "zero")
    rhs = proj.project_only(mask * rhs_raw)

    alpha_hat = alpha_fluid
    if np.any(inputs.chi_new.values > 0.0):
        alpha_hat = alpha_fluid / np.sqrt(p.kappa_solid)
    kron = _induction_preconditioner(grid, 1.0 / dt, alpha_hat, p.eps)

    def precond(v: np.ndarray) -> np.ndarray:
        return proj.project_only(kron.apply(v))

    B = proj.project_only(mask * inputs.B_prev.values)
    deltas: list[float] = []
    total_iters = 0
    last_report = SolveReport(0, 0.0, True)
    n_pass = 1 if p.eps == 0.0 else picard_max
    # inexact Picard: early passes only need to out-resolve the coefficient
    # update; the accepted pass always runs at the full tolerance
    tol_pass = tol if p.eps == 0.0 else max(tol, 1e-6)
    for it in range(n_pass):
        w = quartic_scale * np.sum(stencils.curl(B, h, "zero") ** 2, axis=0)
        op = LinearOperator(make_apply(w), symmetric=True, description="induction operator")
        B_next, last_report = solve_cg(
            op, rhs, tol=tol_pass, max_iter=max_iter, x0=B, precond=precond
        )
        total_iters += last_report.iterations
        if not last_report.converged:
            raise SolverError(f"induction linear solve failed: {last_report.reason}", last_report)
        delta = float(np.max(np.abs(B_next - B)))
        deltas.append(delta)
        B = B_next
        if p.eps == 0.0:
            break
        delta_rel = delta / max(1.0, float(np.max(np.abs(B))))
        if delta <= picard_tol * max(1.0, float(np.max(np.abs(B)))) and tol_pass <= tol:
            break
        tol_pass = tol if delta_rel <= 50.0 * picard_tol else max(tol, min(1e-6, 0.02 * delta_rel))
    else:
        raise SolverError(
            f"induction Picard iteration did not converge in {picard_max} passes "
            f"(last delta {deltas[-1]:.3e}); quartic term too strong for frozen-"
            "coefficient iteration"
        )
    B, _, _ = proj.project_values(B, tol=min(1e-10, tol))
    report = InductionReport(
        iterations=total_iters,
        residual=last_report.residual,
        converged=True,
        picard_iterations=len(deltas),
        picard_deltas=deltas,
    )
    return VectorField(grid, B), report


def solid_curl_residual(B: VectorField, chi: ScalarField) -> float:
    """L2 norm of curl B over solid cells at least two cells inside the body.

    Cells within two layers of the interface are excluded so the stencil
    never straddles the jump in the effective resistivity.
    """
    solid = chi.values > 0.5
    deep = ndimage.binary_erosion(solid, structure=np.ones((3, 3, 3), dtype=bool), iterations=2)
    if not np.any(deep):
        return 0.0
    c = stencils.curl(B.values, B.grid.h, "zero")
    c2 = np.sum(c * c, axis=0)
    return float(np.sqrt(np.sum(c2[deep]) * B.grid.cell_volume))


def mollify_forcing(
    f: Callable[[float], VectorField],
    gamma: float,
    t: float,
    horizon: float,
    n_quad: int = 64,
) -> VectorField:
    """Time-mollified forcing sample with the support-shifting kernel.

    Convolves ``f`` with a compactly supported bump of width ``gamma``
    centered at t + shift(t), where shift(t) = gamma (T - 2t)/T keeps the
    kernel support inside [0, T].  The kernel is normalized against the
    same midpoint quadrature used for the convolution, so constants in
    time pass through exactly.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    slack = 1e-9 * max(1.0, horizon)
    if not -slack <= t <= horizon + slack:
        raise ValueError("sample time outside [0, T]")
    t = min(max(t, 0.0), horizon)
    if 2.0 * gamma > horizon + 1e-12:
        raise ValueError("mollifier width exceeds the time horizon")
    shift = gamma * (horizon - 2.0 * t) / horizon
    center = t + shift
    lo, hi = center - gamma, center + gamma
    if lo < -1e-12 or hi > horizon + 1e-12:
        raise AssertionError("mollifier support left [0, T]")
    s = lo + (np.arange(n_quad) + 0.5) * (hi - lo) / n_quad
    xi = (s - center) / gamma
    weights = np.exp(-1.0 / (1.0 - xi**2))
    weights /= weights.sum()
    first = f(float(s[0]))
    acc = weights[0] * first.values
    for k in range(1, n_quad):
        acc = acc + weights[k] * f(float(s[k])).values
    return VectorField(first.grid, acc)


def reconstruct_em(
    B: VectorField,
    u: VectorField,
    J: VectorField,
    chi: ScalarField,
    sigma: float,
    mu: float,
) -> tuple[VectorField, VectorField, VectorField]:
    """Diagnostic magnetic field, current and electric field.

    H = B/mu everywhere; j = curl H - J in the fluid and exactly zero in
    the insulating solid; E = j/sigma - u x B in the fluid.  The solid
    electric field is not reconstructed and is reported as zero.
    """
    grid = B.grid
    fluid = 1.0 - chi.values
    H = VectorField(grid, B.values / mu)
    j_vals = fluid * (stencils.curl(H.values, grid.h, "onesided") - J.values)
    j = VectorField(grid, j_vals)
    E_vals = fluid * (j_vals / sigma - stencils.cross(u.values, B.values))
    E = VectorField(grid, E_vals)
    return H, j, E


_PRECOND_CACHE: dict[tuple, KroneckerSolve] = {}


def _induction_preconditioner(grid: Grid, c0: float, alpha: float, eps: float) -> KroneckerSolve:
    key = ("induction", grid.n, grid.L, round(c0, 12), round(alpha, 12), eps)
    kron = _PRECOND_CACHE.get(key)
    if kron is None:
        n, h = grid.n, grid.h
        main = np.full(n, -2.0 / h**2)
        off = np.full(n - 1, 1.0 / h**2)
        T = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
        kron = KroneckerSolve(T, lambda lam: c0 + alpha * (-lam) + eps * lam * lam)
        _PRECOND_CACHE[key] = kron
        if len(_PRECOND_CACHE) > 32:
            _PRECOND_CACHE.pop(next(iter(_PRECOND_CACHE)))
    return kron
