"""Analytic initial-field and forcing presets.

All velocity/induction presets are built solenoidal (or close to it) and
are Leray-projected at initialization anyway.  Forcing presets return a
field for any requested time so the time mollifier can sample them.
"""

from __future__ import annotations

import numpy as np

from .config import SimConfig
from .grid import Grid, ScalarField, VectorField

__all__ = ["initial_rho", "initial_u", "initial_B", "forcing_g", "forcing_J"]


def initial_rho(cfg: SimConfig, grid: Grid) -> ScalarField:
    lo, hi = cfg.physics_rho_min, cfg.physics_rho_max
    if cfg.init_rho == "uniform":
        value = cfg.init_rho_value if cfg.init_rho_value > 0 else lo
        return grid.scalar(np.full((grid.n,) * 3, value))
    x, y, z = grid.centers()
    L = grid.L
    c = 0.4 * L
    bump = np.exp(-(((x - c) ** 2 + (y - 0.5 * L) ** 2 + (z - 0.6 * L) ** 2) / (2 * (0.15 * L) ** 2)))
    return grid.scalar(lo + (hi - lo) * cfg.init_rho_amplitude * bump)


def initial_u(cfg: SimConfig, grid: Grid) -> VectorField:
    a = cfg.init_u_amplitude
    if cfg.init_u == "zero" or a == 0.0:
        return grid.vector()
    x, y, z = grid.centers()
    L = grid.L
    zero = np.zeros_like(x)
    if cfg.init_u == "shear":
        return grid.vector(np.stack([a * np.sin(2 * np.pi * y / L), zero, zero]))
    # "vortex": planar cellular flow, solenoidal
    return grid.vector(
        np.stack(
            [
                a * np.sin(np.pi * x / L) * np.cos(np.pi * y / L),
                -a * np.cos(np.pi * x / L) * np.sin(np.pi * y / L),
                zero,
            ]
        )
    )


def initial_B(cfg: SimConfig, grid: Grid) -> VectorField:
    a = cfg.init_B_amplitude
    if cfg.init_B == "zero" or a == 0.0:
        return grid.vector()
    x, y, z = grid.centers()
    L = grid.L
    zero = np.zeros_like(x)
    if cfg.init_B == "uniform_z":
        return grid.vector(np.stack([zero, zero, np.full_like(x, a)]))
    # "loop": azimuthal field around a flux tube, exactly solenoidal
    s = 0.15 * L
    r2 = (x - 0.5 * L) ** 2 + (y - 0.7 * L) ** 2
    psi = np.exp(-r2 / (2 * s * s))
    return grid.vector(
        np.stack([a * -(y - 0.7 * L) / s * psi, a * (x - 0.5 * L) / s * psi, zero])
    )


def _shear_profile(grid: Grid, amplitude: float) -> np.ndarray:
    x, y, z = grid.centers()
    L = grid.L
    zero = np.zeros_like(x)
    return np.stack([amplitude * np.sin(2 * np.pi * y / L), zero, zero])


def _swirl_profile(grid: Grid, amplitude: float) -> np.ndarray:
    x, y, z = grid.centers()
    L = grid.L
    s = 0.2 * L
    r2 = (x - 0.5 * L) ** 2 + (y - 0.5 * L) ** 2
    bump = np.exp(-r2 / (2 * s * s))
    return np.stack(
        [-amplitude * (y - 0.5 * L) / s * bump, amplitude * (x - 0.5 * L) / s * bump, np.zeros_like(x)]
    )


def forcing_g(cfg: SimConfig, grid: Grid):
    """Time-dependent body-force preset as a callable t -> VectorField."""
    name, a = cfg.forcing_g, cfg.forcing_g_amplitude
    if name == "none" or a == 0.0:
        zero = grid.vector()
        return lambda t: zero
    base = _shear_profile(grid, a)
    if name == "shear":
        f = grid.vector(base)
        return lambda t: f
    T = cfg.time_T
    return lambda t: grid.vector(base * np.sin(np.pi * t / T))


def forcing_J(cfg: SimConfig, grid: Grid):
    """External-current preset as a callable t -> VectorField."""
    name, a = cfg.forcing_J, cfg.forcing_J_amplitude
    if name == "none" or a == 0.0:
        zero = grid.vector()
        return lambda t: zero
    base = _swirl_profile(grid, a)
    if name == "swirl":
        f = grid.vector(base)
        return lambda t: f
    T = cfg.time_T
    return lambda t: grid.vector(base * np.sin(np.pi * t / T))
