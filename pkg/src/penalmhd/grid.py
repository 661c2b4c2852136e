"""Uniform Cartesian grid over the box [0,L]^3 with discrete operators.

Fields are sampled at cell centers x_i = (i + 1/2) h, h = L/n, so the
physical walls sit half a cell outside the outermost samples.  Quadrature
is the midpoint rule; every invariant check in the package evaluates both
sides of an identity with this same quadrature so identities hold to
rounding rather than to discretization error.

Two stencil families coexist (see :mod:`penalmhd.stencils`):

- ``onesided`` closures: the general-purpose second-order operators used
  on analytic/diagnostic fields that do not vanish at the walls.
- ``zero`` / ``mirror`` closures: the adjoint-exact operators the implicit
  solvers and the energy audit are built from.  Velocity-type fields are
  extended by zero outside the box, the density uses the mirror (Neumann)
  closure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import stencils

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "div",
    "grad",
    "curl",
    "laplacian",
    "biharmonic",
    "sym_grad_contraction",
    "integrate",
]


class FieldError(ValueError):
    """Raised when a field violates a structural invariant."""


@dataclass(frozen=True)
class Grid:
    """Uniform n x n x n cell-centered grid on the box [0,L]^3."""

    n: int
    L: float

    def __post_init__(self):
        if self.n < 8:
            raise ValueError(f"grid needs n >= 8, got n={self.n}")
        if not self.L > 0.0:
            raise ValueError("box edge length must be positive")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.h**3

    def axis_centers(self) -> np.ndarray:
        """Cell-center coordinates along one axis, shape (n,)."""
        return (np.arange(self.n) + 0.5) * self.h

    def centers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Meshgrid of cell centers, three (n,n,n) arrays."""
        c = self.axis_centers()
        return np.meshgrid(c, c, c, indexing="ij")

    def scalar(self, values=None) -> "ScalarField":
        if values is None:
            values = np.zeros((self.n,) * 3)
        return ScalarField(self, np.asarray(values, dtype=float))

    def vector(self, values=None) -> "VectorField":
        if values is None:
            values = np.zeros((3,) + (self.n,) * 3)
        return VectorField(self, np.asarray(values, dtype=float))

    def from_function(self, f) -> "ScalarField":
        x, y, z = self.centers()
        return self.scalar(f(x, y, z))

    def vector_from_function(self, f) -> "VectorField":
        x, y, z = self.centers()
        fx, fy, fz = f(x, y, z)
        return self.vector(np.stack([np.broadcast_to(c, x.shape) for c in (fx, fy, fz)]))


def _check_values(grid: Grid, values: np.ndarray, shape: tuple) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != shape:
        raise FieldError(f"expected shape {shape}, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise FieldError("field contains non-finite values")
    return values


@dataclass
class ScalarField:
    """Cell-sampled scalar field; houses density, indicator and pressure."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, (self.grid.n,) * 3)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class VectorField:
    """Three collocated scalar components sharing one grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, (3,) + (self.grid.n,) * 3)

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.values.copy())

    def component(self, a: int) -> ScalarField:
        return ScalarField(self.grid, self.values[a])


def div(v: VectorField, closure: str = "onesided") -> ScalarField:
    """Second-order divergence; one-sided at the boundary by default.

    ``closure="zero"`` gives the zero-extension variant that the Leray
    projection drives to solver tolerance (the discrete constraint
    operator of the incompressibility and div-B conditions).
    """
    return ScalarField(v.grid, stencils.div(v.values, v.grid.h, closure))


def grad(s: ScalarField, closure: str = "onesided") -> VectorField:
    return VectorField(s.grid, stencils.grad(s.values, s.grid.h, closure))


def curl(v: VectorField, closure: str = "onesided") -> VectorField:
    return VectorField(v.grid, stencils.curl(v.values, v.grid.h, closure))


def laplacian(s: ScalarField, closure: str = "onesided") -> ScalarField:
    return ScalarField(s.grid, stencils.laplacian(s.values, s.grid.h, closure))


def biharmonic(v: VectorField) -> VectorField:
    """Biharmonic operator: compact Laplacian squared with zero extension.

    The zero-Dirichlet extension matches the no-slip velocity space, where
    this term supplies the fourth-order regularization of the momentum
    solve.
    """
    h = v.grid.h
    return VectorField(
        v.grid, stencils.laplacian(stencils.laplacian(v.values, h, "zero"), h, "zero")
    )


def sym_grad_contraction(u: VectorField, v: VectorField, closure: str = "onesided") -> float:
    """Quadrature value of the contraction of sym-grad(u) with grad(v)."""
    h = u.grid.h
    total = 0.0
    gu = [stencils.grad(u.values[i], h, closure) for i in range(3)]
    gv = [stencils.grad(v.values[i], h, closure) for i in range(3)]
    for i in range(3):
        for a in range(3):
            dij = 0.5 * (gu[i][a] + gu[a][i])
            total += float(np.sum(dij * gv[i][a]))
    return total * u.grid.cell_volume


def integrate(s: ScalarField) -> float:
    """Midpoint-rule integral over the box."""
    return float(np.sum(s.values)) * s.grid.cell_volume
