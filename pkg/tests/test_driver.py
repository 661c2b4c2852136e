"""Driver: configuration, fixed points, stopping, determinism, interpolants."""

from __future__ import annotations

import filecmp
from dataclasses import replace

import numpy as np
import pytest

from penalmhd.config import ConfigError, SimConfig, parse_config
from penalmhd.driver import eta_sweep, initialize, interpolants, run, step
from penalmhd.grid import Grid
from penalmhd.projection import projector_for


def small_config(tmp_path, **kw):
    base = dict(
        grid_n=10,
        grid_L=1.0,
        time_dt=0.005,
        time_T=0.05,
        physics_nu=0.05,
        reg_eps=0.02,
        reg_eta=0.1,
        body_radius=0.15,
        output_directory=str(tmp_path / "out"),
        output_cadence=5,
    )
    base.update(kw)
    return SimConfig(**base)


class TestConfig:
    def test_parse_roundtrip(self):
        cfg = parse_config(
            """
            grid.n = 12           # inline comment
            time.dt = 0.01
            time.T = 0.1
            init.u = vortex
            init.u_amplitude = 0.05
            body.center = 0.5 0.4 0.5
            """
        )
        assert cfg.grid_n == 12
        assert cfg.init_u == "vortex"
        assert cfg.body_center == (0.5, 0.4, 0.5)

    def test_unknown_key_is_hard_error(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("grid.m = 3\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("grid.n = 12\ngrid.n = 16\n")

    def test_non_integer_step_count_rejected(self):
        with pytest.raises(ConfigError, match="integer multiple"):
            parse_config("time.dt = 0.007\ntime.T = 0.1\n")

    def test_eta_guard_enforced_and_overridable(self):
        with pytest.raises(ConfigError, match="stability"):
            parse_config("time.dt = 0.05\ntime.T = 0.5\nreg.eta = 0.01\n")
        cfg = parse_config(
            "time.dt = 0.05\ntime.T = 0.5\nreg.eta = 0.01\nguard.dt_eta_override = true\n"
        )
        assert cfg.guard_dt_eta_override


class TestInitialize:
    def test_rest_preset_is_valid(self, tmp_path):
        state = initialize(small_config(tmp_path))
        assert np.max(np.abs(state.u.values)) == 0.0
        assert np.max(np.abs(state.B.values)) == 0.0
        assert state.k == 0

    def test_density_outside_band_rejected(self, tmp_path):
        cfg = small_config(tmp_path, init_rho_value=5.0)
        with pytest.raises(ConfigError, match="density"):
            cfg.validate()

    def test_body_too_close_to_wall_rejected(self, tmp_path):
        cfg = small_config(tmp_path, body_center=(0.16, 0.5, 0.5))
        with pytest.raises(ConfigError, match="clearance"):
            initialize(cfg)

    def test_initial_fields_are_projected(self, tmp_path):
        cfg = small_config(tmp_path, init_u="shear", init_u_amplitude=0.2)
        state = initialize(cfg)
        proj = projector_for(state.rho.grid, "velocity")
        div = proj.constraint_divergence(state.u.values)
        assert np.max(np.abs(div)) <= 1e-9


class TestStep:
    def test_rigid_rest_equilibrium(self, tmp_path):
        """Zero data with a resting body stays at rest for 100 steps."""
        cfg = small_config(tmp_path, time_T=0.5, grid_n=8)
        state = initialize(cfg)
        for _ in range(100):
            state, ledger, diags = step(state, cfg)
            assert np.max(np.abs(state.u.values)) <= 1e-10
            assert np.max(np.abs(state.B.values)) <= 1e-10
        assert np.max(np.abs(state.body.center - 0.5)) < 1e-12

    def test_body_drifts_with_projected_initial_velocity(self, tmp_path):
        """A configured body velocity moves the body through its u_G."""
        cfg = small_config(
            tmp_path, body_velocity=(0.05, 0.0, 0.0), reg_eps=1e-6, time_dt=0.005
        )
        state = initialize(cfg)
        new_state, _, _ = step(state, cfg)
        drift = new_state.body.center[0] - 0.5
        # the Leray projection redistributes some momentum into the fluid,
        # so the first-step drift is positive but below the ballistic value
        assert 0.0 < drift <= 0.05 * cfg.time_dt + 1e-12
        assert new_state.body.center[1] == pytest.approx(0.5, abs=1e-10)

    def test_momentum_follows_initial_body_velocity(self, tmp_path):
        """A moving body drags the fluid: after one step u_G is nonzero."""
        cfg = small_config(
            tmp_path,
            grid_n=12,
            init_u="shear",
            init_u_amplitude=0.2,
            forcing_g="shear",
            forcing_g_amplitude=0.5,
        )
        state = initialize(cfg)
        new_state, ledger, diags = step(state, cfg)
        assert diags.max_div_u <= 1e-9
        assert diags.max_div_B <= 1e-9
        assert new_state.t == pytest.approx(cfg.time_dt)


class TestRun:
    def test_completes_and_reports_time_stop(self, tmp_path):
        cfg = small_config(tmp_path)
        summary = run(cfg)
        assert summary.steps_run == cfg.n_steps
        assert summary.stop_reason == "time"
        assert summary.max_div_u <= 1e-9

    def test_fast_body_stops_at_boundary(self, tmp_path):
        cfg = small_config(
            tmp_path,
            grid_n=10,
            time_dt=0.005,
            time_T=2.0,
            physics_nu=1e-3,
            reg_eps=1e-6,
            reg_eta=0.02,
            body_velocity=(0.4, 0.0, 0.0),
            init_u="zero",
            stop_clearance=0.15,
        )
        summary = run(cfg)
        assert summary.stop_reason == "boundary"
        # fluid coupling only slows the body, so the ballistic crossing
        # time is a lower bound for the stop time
        travel = 0.5 - 0.15 - cfg.stop_clearance
        ballistic_time = travel / 0.4
        assert summary.final_time >= ballistic_time - cfg.time_dt
        assert summary.final_time < cfg.time_T

    def test_identical_runs_are_bit_identical(self, tmp_path):
        cfg_a = small_config(
            tmp_path,
            grid_n=8,
            init_u="vortex",
            init_u_amplitude=0.1,
            init_B="loop",
            init_B_amplitude=0.05,
            output_directory=str(tmp_path / "a"),
        )
        cfg_b = replace(cfg_a, output_directory=str(tmp_path / "b"))
        run(cfg_a)
        run(cfg_b)
        for name in ("ledger.csv", "snapshot_000000.vtk", "snapshot_000010.vtk", "trajectory.txt"):
            assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False), name


class TestInterpolants:
    @pytest.fixture
    def trajectory(self, tmp_path):
        cfg = small_config(
            tmp_path, grid_n=8, init_u="vortex", init_u_amplitude=0.1, time_T=0.03
        )
        return run(cfg, keep_trajectory=True).trajectory

    def test_nodes_coincide(self, trajectory):
        t = trajectory[2].t
        affine, const, lagged = interpolants(trajectory, t)
        assert np.max(np.abs(affine.u.values - trajectory[2].u.values)) < 1e-14
        assert const is trajectory[2]
        assert lagged is trajectory[1]

    def test_midpoint_is_arithmetic_mean(self, trajectory):
        t = 0.5 * (trajectory[1].t + trajectory[2].t)
        affine, const, lagged = interpolants(trajectory, t)
        mean = 0.5 * (trajectory[1].u.values + trajectory[2].u.values)
        assert np.max(np.abs(affine.u.values - mean)) < 1e-14
        assert const is trajectory[2]
        assert lagged is trajectory[1]

    def test_lagged_constant_on_half_open_interval(self, trajectory):
        eps = 1e-6
        _, const, lagged = interpolants(trajectory, trajectory[1].t + eps)
        assert const is trajectory[2]
        assert lagged is trajectory[1]

    def test_out_of_range_rejected(self, trajectory):
        with pytest.raises(ValueError):
            interpolants(trajectory, trajectory[-1].t + 1.0)


class TestEtaSweep:
    def test_single_eta_gives_single_row_no_fit(self, tmp_path):
        cfg = small_config(tmp_path, grid_n=8, time_T=0.02)
        result = eta_sweep(cfg, [0.1])
        assert len(result.residuals) == 1
        assert result.slope is None

    def test_resting_rigid_scenario_has_negligible_misfit(self, tmp_path):
        cfg = small_config(tmp_path, grid_n=8, time_T=0.02)
        result = eta_sweep(cfg, [0.1, 0.01])
        assert all(r <= 1e-10 for r in result.residuals)
