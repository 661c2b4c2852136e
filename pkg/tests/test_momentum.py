"""Momentum step: forces, fixed points, dense-oracle equivalence, energy."""

from __future__ import annotations

import numpy as np
import pytest

from penalmhd import stencils
from penalmhd.grid import Grid
from penalmhd.momentum import (
    MomentumStepInputs,
    lorentz_force,
    penalization_term,
    solve_momentum_step,
)
from penalmhd.params import MaterialParams
from penalmhd.projection import projector_for
from penalmhd.rigid import RigidState, Sphere, body_functionals, indicator, rigid_projection


def params(**kw):
    base = dict(
        sigma=1.0, mu=1.0, nu=0.05, rho_min=1.0, rho_max=2.0, eps=1e-3, eta=0.05
    )
    base.update(kw)
    return MaterialParams(**base)


def interior(values):
    return values[..., 2:-2, 2:-2, 2:-2]


class TestLorentzForce:
    def test_constant_field_gives_zero(self, grid16):
        B = grid16.vector(np.ones((3, 16, 16, 16)))
        f = lorentz_force(B, mu=1.0)
        assert np.max(np.abs(interior(f.values))) < 1e-12

    def test_rotational_field_analytic_interior(self, grid16):
        x, y, z = grid16.centers()
        B = grid16.vector(np.stack([-y, x, np.zeros_like(x)]))
        f = lorentz_force(B, mu=1.0).values
        assert np.max(np.abs(interior(f[0]) - interior(-2 * x))) < 1e-11
        assert np.max(np.abs(interior(f[1]) - interior(-2 * y))) < 1e-11

    def test_triple_product_identity(self, grid16, rng):
        B = grid16.vector(rng.standard_normal((3, 16, 16, 16)))
        u = rng.standard_normal((3, 16, 16, 16))
        c = stencils.curl(B.values, grid16.h, "zero")
        w1 = float(np.sum(stencils.cross(c, B.values) * u))
        w2 = float(np.sum(stencils.cross(u, B.values) * c))
        assert abs(w1 + w2) / (1 + abs(w2)) < 1e-12


class TestPenalization:
    def test_zero_indicator_gives_zero(self, grid16, rng):
        rho = grid16.scalar(np.ones((16,) * 3))
        chi = grid16.scalar(np.zeros((16,) * 3))
        u = grid16.vector(rng.standard_normal((3, 16, 16, 16)))
        pen = penalization_term(rho, chi, u, grid16.vector(), 0.05)
        assert np.max(np.abs(pen.values)) == 0.0

    def test_rigid_velocity_on_body_gives_zero(self, grid16):
        body = RigidState(Sphere(0.2), np.array([0.5, 0.5, 0.5]))
        chi = indicator(body, grid16)
        rho = grid16.scalar(np.ones((16,) * 3))
        from penalmhd.rigid import rigid_field

        u = rigid_field(grid16, np.array([0.1, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]), np.full(3, 0.5))
        pen = penalization_term(rho, chi, u, u, 0.05)
        assert np.max(np.abs(pen.values)) == 0.0

    def test_support_contained_in_indicator(self, grid16, rng):
        body = RigidState(Sphere(0.2), np.array([0.5, 0.5, 0.5]))
        chi = indicator(body, grid16)
        rho = grid16.scalar(1.0 + rng.random((16,) * 3))
        u = grid16.vector(rng.standard_normal((3, 16, 16, 16)))
        pi = grid16.vector(rng.standard_normal((3, 16, 16, 16)))
        pen = penalization_term(rho, chi, u, pi, 0.05)
        assert np.max(np.abs(pen.values * (1.0 - chi.values))) == 0.0

    def test_rhs_locality_in_eta(self, grid16, rng):
        """Changing eta only changes the explicit forcing inside the body."""
        body = RigidState(Sphere(0.2), np.array([0.5, 0.5, 0.5]))
        chi = indicator(body, grid16)
        rho = grid16.scalar(np.ones((16,) * 3))
        u = grid16.vector(rng.standard_normal((3, 16, 16, 16)))
        pi = grid16.vector(rng.standard_normal((3, 16, 16, 16)))
        diff = penalization_term(rho, chi, u, pi, 0.01).values - penalization_term(
            rho, chi, u, pi, 0.1
        ).values
        assert np.max(np.abs(diff * (1.0 - chi.values))) == 0.0
        assert np.max(np.abs(diff * chi.values)) > 0.0


def build_step_inputs(grid, rng, p, dt, rho_variation=True, u_scale=0.1, B_scale=0.1):
    body = RigidState(Sphere(0.22 * grid.L), np.full(3, 0.5 * grid.L))
    chi = indicator(body, grid)
    x, y, z = grid.centers()
    L = grid.L
    if rho_variation:
        bump = np.exp(-((x - 0.45 * L) ** 2 + (y - 0.55 * L) ** 2 + (z - 0.5 * L) ** 2) / (2 * (0.18 * L) ** 2))
        rho_prev = grid.scalar(p.rho_min + (p.rho_max - p.rho_min) * 0.9 * bump)
    else:
        rho_prev = grid.scalar(np.full((grid.n,) * 3, p.rho_min))
    proj = projector_for(grid, "velocity")
    u_prev = grid.vector(proj.project_only(u_scale * rng.standard_normal((3,) + (grid.n,) * 3)))
    from penalmhd.density import solve_density_step

    rho_new, _ = solve_density_step(rho_prev, u_prev, p.eps, dt, p.rho_min, p.rho_max)
    f = body_functionals(rho_prev, chi, u_prev)
    pi_prev = rigid_projection(f, grid)
    proj_b = projector_for(grid, "magnetic")
    B_prev = grid.vector(proj_b.project_only(B_scale * rng.standard_normal((3,) + (grid.n,) * 3)))
    g = grid.vector(0.2 * rng.standard_normal((3,) + (grid.n,) * 3))
    return MomentumStepInputs(rho_new, rho_prev, u_prev, chi, pi_prev, B_prev, g, p, dt)


class TestMomentumStep:
    def test_zero_data_is_fixed_point(self, grid16):
        p = params()
        zero_chi = grid16.scalar(np.zeros((16,) * 3))
        rho = grid16.scalar(np.ones((16,) * 3))
        inputs = MomentumStepInputs(
            rho, rho, grid16.vector(), zero_chi, grid16.vector(), grid16.vector(),
            grid16.vector(), p, 0.01,
        )
        u, pr, rep = solve_momentum_step(inputs, tol=1e-10)
        assert np.max(np.abs(u.values)) == 0.0
        assert np.max(np.abs(pr.values)) == 0.0

    def test_rigid_data_keeps_penalty_silent(self, grid16):
        """With u_prev exactly rigid, the penalty vanishes and eta is inert."""
        body = RigidState(Sphere(0.2), np.array([0.5, 0.5, 0.5]))
        chi = indicator(body, grid16)
        rho = grid16.scalar(np.ones((16,) * 3))
        from penalmhd.rigid import rigid_field

        u_rigid = rigid_field(
            grid16, np.array([0.05, 0.0, 0.0]), np.array([0.0, 0.0, 0.5]), np.full(3, 0.5)
        )
        f = body_functionals(rho, chi, u_rigid)
        pi = rigid_projection(f, grid16)
        pen = penalization_term(rho, chi, u_rigid, pi, 0.01)
        assert np.max(np.abs(pen.values)) < 1e-12
        dt = 0.005
        outs = []
        for eta in (0.05, 1e-3):
            p = params(nu=0.05, eta=eta)
            inputs = MomentumStepInputs(
                rho, rho, u_rigid, chi, pi, grid16.vector(), grid16.vector(), p, dt
            )
            u, _, _ = solve_momentum_step(inputs, tol=1e-12)
            outs.append(u.values)
        # the penalty contributed exactly zero, so eta cannot matter
        assert np.max(np.abs(outs[0] - outs[1])) < 1e-11
        # and one moderate-viscosity step leaves the rigid core nearly intact
        core = chi.values * np.sum((outs[0] - u_rigid.values) ** 2, axis=0)
        rel = np.sqrt(core.max()) / np.max(np.abs(u_rigid.values))
        assert rel < 0.25

    def test_no_slip_layer_exactly_zero(self, rng):
        g = Grid(12, 1.0)
        p = params()
        inputs = build_step_inputs(g, rng, p, 0.01)
        u, _, _ = solve_momentum_step(inputs, tol=1e-10)
        for layer in (
            u.values[:, 0], u.values[:, -1],
            u.values[:, :, 0], u.values[:, :, -1],
            u.values[:, :, :, 0], u.values[:, :, :, -1],
        ):
            assert np.max(np.abs(layer)) == 0.0

    def test_divergence_within_projection_target(self, rng):
        g = Grid(12, 1.0)
        inputs = build_step_inputs(g, rng, params(), 0.01)
        u, _, _ = solve_momentum_step(inputs, tol=1e-10)
        proj = projector_for(g, "velocity")
        assert np.max(np.abs(proj.constraint_divergence(u.values))) <= 1e-9

    def test_energy_budget_without_sources(self, rng):
        """Kinetic energy cannot grow with g = B = chi = 0."""
        g = Grid(12, 1.0)
        p = params(eps=1e-3)
        proj = projector_for(g, "velocity")
        u_prev = g.vector(proj.project_only(0.2 * rng.standard_normal((3, 12, 12, 12))))
        rho = g.scalar(np.full((12,) * 3, 1.3))
        zero_chi = g.scalar(np.zeros((12,) * 3))
        inputs = MomentumStepInputs(
            rho, rho, u_prev, zero_chi, g.vector(), g.vector(), g.vector(), p, 0.01
        )
        u, _, _ = solve_momentum_step(inputs, tol=1e-11)
        vol = g.cell_volume
        e_new = 0.5 * float(np.sum(rho.values * np.sum(u.values**2, axis=0))) * vol
        e_old = 0.5 * float(np.sum(rho.values * np.sum(u_prev.values**2, axis=0))) * vol
        assert e_new <= e_old * (1 + 1e-9) + 1e-9 * e_old

    def test_matches_dense_direct_solve(self, rng):
        """Full random step against the dense nullspace oracle at 8^3."""
        from reference_step import dense_momentum_solve

        g = Grid(8, 1.0)
        p = params(eps=2e-3, nu=0.08, eta=0.05)
        dt = 0.01
        inputs = build_step_inputs(g, rng, p, dt)
        u, _, _ = solve_momentum_step(inputs, tol=1e-12)
        ref = dense_momentum_solve(
            n=8,
            L=1.0,
            dt=dt,
            nu=p.nu,
            eps=p.eps,
            eta=p.eta,
            mu=p.mu,
            rho_new=inputs.rho_new.values,
            rho_prev=inputs.rho_prev.values,
            u_prev=inputs.u_prev.values,
            chi_new=inputs.chi_new.values,
            pi_prev=inputs.pi_prev.values,
            B_prev=inputs.B_prev.values,
            g_force=inputs.g.values,
        )
        assert np.max(np.abs(u.values - ref)) < 1e-7
