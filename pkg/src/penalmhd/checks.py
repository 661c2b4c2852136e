"""Self-contained invariant battery for the ``check`` CLI subcommand.

Each check returns (name, passed, detail).  The battery covers operator
adjointness, projection properties, rigid-body identities, the
conservation/monotonicity audits of the three implicit solvers, and one
fully audited driver step, all sized to finish in seconds on small grids.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import stencils
from .config import SimConfig
from .density import entropy_check, solve_density_step
from .driver import initialize, step
from .energy import mixed_term_residual
from .grid import Grid, integrate
from .induction import mollify_forcing
from .momentum import penalization_term
from .projection import projector_for
from .rigid import (
    RigidState,
    Sphere,
    advance_isometry,
    body_functionals,
    indicator,
    rigid_field,
    rigid_projection,
)

__all__ = ["run_checks"]


def run_checks(cfg: SimConfig) -> list[tuple[str, bool, str]]:
    results: list[tuple[str, bool, str]] = []

    def record(name: str, passed: bool, detail: str):
        results.append((name, bool(passed), detail))

    n = min(cfg.grid_n, 12)
    grid = Grid(n, cfg.grid_L)
    h = grid.h
    rng = np.random.default_rng(2024)

    # operator adjointness with the zero-extension closure
    a = rng.standard_normal((n, n, n))
    v = rng.standard_normal((3, n, n, n))
    w = rng.standard_normal((3, n, n, n))
    lhs = np.sum(stencils.grad(a, h, "zero") * v)
    rhs = -np.sum(a * stencils.div(v, h, "zero"))
    record("grad/div adjointness", abs(lhs - rhs) < 1e-10, f"defect {abs(lhs - rhs):.2e}")
    lhs = np.sum(stencils.curl(v, h, "zero") * w)
    rhs = np.sum(v * stencils.curl(w, h, "zero"))
    record("curl self-adjointness", abs(lhs - rhs) < 1e-10, f"defect {abs(lhs - rhs):.2e}")
    dc = float(np.max(np.abs(stencils.div(stencils.curl(v, h, "zero"), h, "zero"))))
    record("div(curl) identity", dc < 1e-11, f"max {dc:.2e}")

    # projection: target divergence, idempotence, contraction
    for kind in ("velocity", "magnetic"):
        proj = projector_for(grid, kind)
        u1, _, info = proj.project_values(v, tol=1e-10)
        u2, _, _ = proj.project_values(u1, tol=1e-10)
        drift = float(np.max(np.abs(u2 - u1)))
        shrank = float(np.sum(u1 * u1)) <= float(np.sum((proj.mask * v) ** 2)) + 1e-12
        record(
            f"leray projection ({kind})",
            info.max_divergence < 1e-9 and drift < 1e-9 and shrank,
            f"div {info.max_divergence:.2e}, idem {drift:.2e}",
        )

    # quadrature linearity / monotonicity
    s1 = grid.scalar(np.abs(rng.standard_normal((n, n, n))))
    mono = integrate(s1) >= 0.0
    lin = abs(
        integrate(grid.scalar(2.0 * s1.values + 1.0))
        - (2.0 * integrate(s1) + grid.L**3)
    )
    record("quadrature linear+monotone", mono and lin < 1e-12, f"lin defect {lin:.2e}")

    # rigid body identities
    body = RigidState(Sphere(0.22 * grid.L), np.full(3, 0.5 * grid.L))
    chi = indicator(body, grid)
    rho = grid.scalar(np.full((n, n, n), 1.3))
    u_rand = grid.vector(rng.standard_normal((3, n, n, n)))
    f = body_functionals(rho, chi, u_rand)
    pi = rigid_projection(f, grid)
    worst = 0.0
    for _ in range(5):
        psi = rigid_field(grid, rng.standard_normal(3), rng.standard_normal(3), f.center)
        num = float(
            np.sum(rho.values * chi.values * np.sum((u_rand.values - pi.values) * psi.values, axis=0))
        )
        den = 1.0 + abs(
            float(np.sum(rho.values * chi.values * np.sum(u_rand.values * psi.values, axis=0)))
        )
        worst = max(worst, abs(num) / den)
    record("rigid projection orthogonality", worst < 1e-10, f"residual {worst:.2e}")
    f2 = body_functionals(rho, chi, pi)
    pi2 = rigid_projection(f2, grid)
    drift = float(np.max(np.abs(pi2.values - pi.values)))
    record("rigid projection idempotence", drift < 1e-12, f"drift {drift:.2e}")

    pose = body
    pts = rng.uniform(0.4 * grid.L, 0.6 * grid.L, (6, 3))
    d0 = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
    moved = pts.copy()
    for _ in range(100):
        pose = replace(
            pose,
            velocity=rng.standard_normal(3) * 0.05,
            angular_velocity=rng.standard_normal(3),
        )
        old_c, old_R = pose.center.copy(), pose.rotation.copy()
        pose = advance_isometry(pose, 1e-3)
        moved = (pose.rotation @ old_R.T @ (moved - old_c).T).T + pose.center
    d1 = np.linalg.norm(moved[:, None] - moved[None, :], axis=-1)
    iu = np.triu_indices(6, 1)
    dist_drift = float(np.max(np.abs(d1[iu] - d0[iu]) / d0[iu]))
    record("isometry distance preservation", dist_drift < 1e-10, f"drift {dist_drift:.2e}")

    # density: constants stationary, mass conserved, entropy non-increasing
    proj_u = projector_for(grid, "velocity")
    adv = grid.vector(proj_u.project_only(rng.standard_normal((3, n, n, n)) * 0.05))
    rho_c = grid.scalar(np.full((n, n, n), 1.5))
    out, _ = solve_density_step(rho_c, adv, 0.02, 0.01, 1.0, 2.0)
    const_keep = float(np.max(np.abs(out.values - 1.5)))
    record("density constants stationary", const_keep < 1e-12, f"drift {const_keep:.2e}")
    x, _, _ = grid.centers()
    rho_v = grid.scalar(1.2 + 0.5 * np.sin(2 * np.pi * x / grid.L) ** 2)
    out, _ = solve_density_step(rho_v, adv, 0.02, 0.01, 1.0, 2.0)
    mass_drift = abs(integrate(out) - integrate(rho_v))
    record("density mass conservation", mass_drift < 1e-9, f"drift {mass_drift:.2e}")
    after, before = entropy_check(out, rho_v, lambda z: z * z)
    record("density entropy decay", after <= before + 1e-10, f"delta {after - before:.2e}")

    # penalization support
    pen = penalization_term(rho, chi, u_rand, pi, 0.05)
    outside = float(np.max(np.abs(pen.values * (1.0 - chi.values))))
    record("penalty supported on body", outside == 0.0, f"max outside {outside:.2e}")

    # mixed-term identity
    worst = max(
        mixed_term_residual(
            grid.vector(rng.standard_normal((3, n, n, n))),
            grid.vector(rng.standard_normal((3, n, n, n))),
        )
        for _ in range(3)
    )
    record("mixed-term identity", worst < 1e-12, f"residual {worst:.2e}")

    # mollifier passes constants through exactly
    const_field = grid.vector(np.ones((3, n, n, n)))
    mol = mollify_forcing(lambda t: const_field, 0.01, 0.35, 1.0)
    mol_err = float(np.max(np.abs(mol.values - 1.0)))
    record("mollifier unit mass", mol_err < 1e-14, f"err {mol_err:.2e}")

    # one audited driver step on a shrunken clone of the config
    small = replace(
        cfg,
        grid_n=n,
        output_directory=cfg.output_directory,
        init_snapshot="",
    )
    try:
        small.validate()
        state = initialize(small)
        new_state, ledger, diags = step(state, small)
        record(
            "full step energy audit",
            True,
            f"div_u {diags.max_div_u:.2e}, div_B {diags.max_div_B:.2e}",
        )
        record(
            "step divergence constraints",
            diags.max_div_u < 1e-9 and diags.max_div_B < 1e-9,
            f"{diags.max_div_u:.2e}, {diags.max_div_B:.2e}",
        )
    except Exception as exc:  # audit or solver failure is a check failure
        record("full step energy audit", False, repr(exc))

    return results
