"""Density step: maximum principle, conservation, entropy, consistency."""

from __future__ import annotations

import numpy as np
import pytest

from penalmhd import stencils
from penalmhd.density import MaxPrincipleError, entropy_check, solve_density_step
from penalmhd.grid import Grid, integrate
from penalmhd.projection import projector_for


def divergence_free_velocity(grid, rng, scale=0.05):
    proj = projector_for(grid, "velocity")
    return grid.vector(proj.project_only(scale * rng.standard_normal((3,) + (grid.n,) * 3)))


def smooth_admissible_density(grid, lo=1.0, hi=2.0):
    x, y, z = grid.centers()
    L = grid.L
    bump = np.exp(-((x - 0.45 * L) ** 2 + (y - 0.55 * L) ** 2 + (z - 0.5 * L) ** 2) / (2 * (0.16 * L) ** 2))
    return grid.scalar(lo + (hi - lo) * 0.95 * bump)


class TestDensityStep:
    def test_constants_are_stationary(self, grid16, rng):
        u = divergence_free_velocity(grid16, rng)
        rho = grid16.scalar(np.full((16,) * 3, 1.4))
        out, rep = solve_density_step(rho, u, 0.02, 0.01, 1.0, 2.0)
        assert np.array_equal(out.values, rho.values)
        assert rep.solve.iterations == 0

    def test_pure_diffusion_conserves_mass(self, grid16):
        rho = smooth_admissible_density(grid16)
        out, _ = solve_density_step(rho, grid16.vector(), 0.05, 0.02, 1.0, 2.0)
        assert integrate(out) == pytest.approx(integrate(rho), abs=1e-10)

    def test_mass_conserved_under_projected_advection(self, grid16, rng):
        u = divergence_free_velocity(grid16, rng)
        rho = smooth_admissible_density(grid16)
        out, _ = solve_density_step(rho, u, 0.02, 0.01, 1.0, 2.0)
        assert integrate(out) == pytest.approx(integrate(rho), abs=1e-9)

    def test_matches_dense_direct_solve(self, rng):
        g = Grid(8, 1.0)
        u = divergence_free_velocity(g, rng, scale=0.1)
        rho = smooth_admissible_density(g)
        eps, dt = 0.05, 0.01
        out, _ = solve_density_step(rho, u, eps, dt, 1.0, 2.0)

        n3 = 8**3
        dense = np.zeros((n3, n3))
        for j in range(n3):
            e = np.zeros(n3)
            e[j] = 1.0
            v = e.reshape((8, 8, 8))
            img = v / dt
            for a in range(3):
                img = img + u.values[a] * stencils.diff(v, a, g.h, "mirror")
            img = img - eps * stencils.laplacian(v, g.h, "mirror")
            dense[:, j] = img.ravel()
        want = np.linalg.solve(dense, rho.values.ravel() / dt).reshape((8, 8, 8))
        assert np.max(np.abs(out.values - want)) < 1e-8

    def test_bounds_audited_over_many_steps(self, rng):
        g = Grid(16, 1.0)
        u = divergence_free_velocity(g, rng, scale=0.2)
        rho = smooth_admissible_density(g)
        for _ in range(20):
            rho, rep = solve_density_step(rho, u, 0.02, 0.01, 1.0, 2.0)
            assert rep.min >= 1.0 - 1e-8
            assert rep.max <= 2.0 + 1e-8

    def test_violation_detection_raises(self, grid16):
        rho = grid16.scalar(np.full((16,) * 3, 1.5))
        # admissible band that the (constant) solution trivially violates
        with pytest.raises(MaxPrincipleError):
            solve_density_step(rho, grid16.vector(), 0.02, 0.01, 1.0, 1.2)


class TestEntropy:
    def test_equal_states_equal_entropy(self, grid16):
        rho = smooth_admissible_density(grid16)
        after, before = entropy_check(rho, rho, lambda z: z * z)
        assert after == before

    def test_linear_beta_is_mass(self, grid16, rng):
        u = divergence_free_velocity(grid16, rng)
        rho = smooth_admissible_density(grid16)
        out, _ = solve_density_step(rho, u, 0.02, 0.01, 1.0, 2.0)
        after, before = entropy_check(out, rho, lambda z: z)
        assert after == pytest.approx(before, abs=1e-9)

    def test_zlogz_decreases_and_matches_dissipation_integral(self, grid16):
        rho = smooth_admissible_density(grid16)
        eps, dt = 0.05, 0.01
        out, _ = solve_density_step(rho, grid16.vector(), eps, dt, 1.0, 2.0)
        beta = lambda z: z * np.log(z)
        after, before = entropy_check(out, rho, beta)
        assert after <= before + 1e-10
        # direct evaluation of the dissipation functional on the new state
        beta_pp = 1.0 / out.values
        grad_rho = stencils.grad(out.values, grid16.h, "mirror")
        dissipation = eps * dt * float(
            np.sum(beta_pp * np.sum(grad_rho**2, axis=0))
        ) * grid16.cell_volume
        drop = before - after
        assert drop == pytest.approx(dissipation, rel=0.35)

    def test_convex_family_non_increasing(self, grid16, rng):
        u = divergence_free_velocity(grid16, rng, scale=0.1)
        rho = smooth_admissible_density(grid16)
        betas = [lambda z: z * z, lambda z: z * np.log(z), lambda z: (z - 1.0) ** 2]
        for _ in range(10):
            out, _ = solve_density_step(rho, u, 0.02, 0.01, 1.0, 2.0)
            for beta in betas:
                after, before = entropy_check(out, rho, beta)
                assert after <= before + 1e-10
            rho = out


def test_small_eps_limits_to_implicit_advection():
    """One step converges linearly in eps to the eps=0 advection step."""
    g = Grid(12, 1.0)
    rng = np.random.default_rng(5)
    u = divergence_free_velocity(g, rng, scale=0.3)
    rho = smooth_admissible_density(g)
    dt = 0.01
    base, _ = solve_density_step(rho, u, 0.0, dt, 1.0, 2.0)
    errors = []
    eps_values = (1e-2, 1e-3, 1e-4)
    for eps in eps_values:
        with np.errstate(all="ignore"):
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out, _ = solve_density_step(rho, u, eps, dt, 1.0, 2.0)
        errors.append(float(np.max(np.abs(out.values - base.values))))
    slope = np.polyfit(np.log10(eps_values), np.log10(errors), 1)[0]
    assert 0.8 <= slope <= 1.2
