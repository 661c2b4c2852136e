"""Flat key=value configuration with dotted section names.

The format is deliberately diff-friendly: one ``section.key = value`` per
line, ``#`` comments, no nesting, no quoting.  Unknown keys are hard
errors; every key has a documented type and default (see README).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .params import MaterialParams

__all__ = ["SimConfig", "ConfigError", "parse_config", "load_config"]


class ConfigError(ValueError):
    """A config key is unknown, mistyped, or violates an invariant."""


def _triple(text: str) -> tuple[float, float, float]:
    parts = text.split()
    if len(parts) != 3:
        raise ConfigError(f"expected three numbers, got {text!r}")
    return tuple(float(p) for p in parts)  # type: ignore[return-value]


_RHO_PRESETS = ("uniform", "blob")
_U_PRESETS = ("zero", "shear", "vortex")
_B_PRESETS = ("zero", "loop", "uniform_z")
_G_PRESETS = ("none", "shear", "pulse_shear")
_J_PRESETS = ("none", "swirl", "pulse_swirl")


@dataclass
class SimConfig:
    """Complete run description; defaults give a small valid scenario."""

    grid_n: int = 24
    grid_L: float = 1.0
    time_dt: float = 0.005
    time_T: float = 0.1
    physics_sigma: float = 1.0
    physics_mu: float = 1.0
    physics_nu: float = 0.05
    physics_rho_min: float = 1.0
    physics_rho_max: float = 2.0
    reg_eps: float = 1e-3
    reg_eta: float = 0.05
    reg_kappa_solid: float = 1e-3
    reg_gamma: float = 0.0  # 0 selects the default gamma = dt
    body_shape: str = "sphere"
    body_radius: float = 0.15
    body_half_extents: tuple[float, float, float] = (0.1, 0.1, 0.1)
    body_center: tuple[float, float, float] = (0.5, 0.5, 0.5)
    body_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    body_angular_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    init_rho: str = "uniform"
    init_rho_value: float = 0.0  # 0 selects rho_min
    init_rho_amplitude: float = 0.9
    init_u: str = "zero"
    init_u_amplitude: float = 0.1
    init_B: str = "zero"
    init_B_amplitude: float = 0.1
    init_snapshot: str = ""
    forcing_g: str = "none"
    forcing_g_amplitude: float = 0.0
    forcing_J: str = "none"
    forcing_J_amplitude: float = 0.0
    solver_tol: float = 1e-10
    solver_max_iter: int = 1500
    solver_picard_max: int = 30
    output_cadence: int = 10
    output_directory: str = "out"
    stop_clearance: float = 0.02
    guard_dt_eta_override: bool = False

    def material_params(self) -> MaterialParams:
        return MaterialParams(
            sigma=self.physics_sigma,
            mu=self.physics_mu,
            nu=self.physics_nu,
            rho_min=self.physics_rho_min,
            rho_max=self.physics_rho_max,
            eps=self.reg_eps,
            eta=self.reg_eta,
            kappa_solid=self.reg_kappa_solid,
        )

    @property
    def gamma(self) -> float:
        return self.reg_gamma if self.reg_gamma > 0.0 else self.time_dt

    @property
    def n_steps(self) -> int:
        return int(round(self.time_T / self.time_dt))

    # solver tolerances derived from the base tolerance: the projection
    # Poisson runs at tol, momentum/induction one decade looser, the
    # density three decades tighter (its entropy audit is the strictest)
    @property
    def tol_projection(self) -> float:
        return self.solver_tol

    @property
    def tol_momentum(self) -> float:
        return 10.0 * self.solver_tol

    @property
    def tol_induction(self) -> float:
        return 10.0 * self.solver_tol

    @property
    def tol_density(self) -> float:
        return min(1e-13, self.solver_tol)

    def validate(self):
        if self.grid_n < 8:
            raise ConfigError("grid.n must be at least 8")
        if self.grid_L <= 0:
            raise ConfigError("grid.L must be positive")
        if self.time_dt <= 0 or self.time_T <= 0:
            raise ConfigError("time.dt and time.T must be positive")
        ratio = self.time_T / self.time_dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError("time.T must be an integer multiple of time.dt")
        try:
            self.material_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.init_rho not in _RHO_PRESETS:
            raise ConfigError(f"init.rho must be one of {_RHO_PRESETS}")
        if self.init_u not in _U_PRESETS:
            raise ConfigError(f"init.u must be one of {_U_PRESETS}")
        if self.init_B not in _B_PRESETS:
            raise ConfigError(f"init.B must be one of {_B_PRESETS}")
        if self.forcing_g not in _G_PRESETS:
            raise ConfigError(f"forcing.g must be one of {_G_PRESETS}")
        if self.forcing_J not in _J_PRESETS:
            raise ConfigError(f"forcing.J must be one of {_J_PRESETS}")
        if self.body_shape not in ("sphere", "box"):
            raise ConfigError("body.shape must be sphere or box")
        if self.init_rho == "uniform":
            value = self.init_rho_value if self.init_rho_value > 0 else self.physics_rho_min
            if not self.physics_rho_min <= value <= self.physics_rho_max:
                raise ConfigError(
                    f"uniform density {value} lies outside "
                    f"[{self.physics_rho_min}, {self.physics_rho_max}]"
                )
        if not 0.0 < self.init_rho_amplitude <= 1.0:
            raise ConfigError("init.rho_amplitude must lie in (0, 1]")
        if self.stop_clearance <= 0:
            raise ConfigError("stop.clearance must be positive")
        if self.output_cadence < 1:
            raise ConfigError("output.cadence must be at least 1")
        guard = self.reg_eta * self.physics_rho_min / self.physics_rho_max
        if self.time_dt > guard and not self.guard_dt_eta_override:
            raise ConfigError(
                f"time.dt = {self.time_dt} exceeds the explicit-penalty stability "
                f"guard eta*rho_min/rho_max = {guard:.3g}; set guard.dt_eta_override "
                "= true to proceed anyway"
            )
        if 2.0 * self.gamma > self.time_T:
            raise ConfigError("mollifier width 2*gamma must not exceed time.T")


_KEY_MAP = {f.name.replace("_", ".", 1): f for f in fields(SimConfig)}


def _convert(f, raw: str):
    if f.type in ("int", int):
        return int(raw)
    if f.type in ("float", float):
        return float(raw)
    if f.type in ("bool", bool):
        low = raw.lower()
        if low not in ("true", "false"):
            raise ConfigError(f"boolean key {f.name} needs true/false, got {raw!r}")
        return low == "true"
    if "tuple" in str(f.type):
        return _triple(raw)
    return raw


def parse_config(text: str) -> SimConfig:
    cfg = SimConfig()
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        f = _KEY_MAP.get(key)
        if f is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            setattr(cfg, f.name, _convert(f, raw))
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> SimConfig:
    return parse_config(Path(path).read_text())
