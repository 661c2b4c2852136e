"""Leray projection onto discretely divergence-free, wall-compatible fields.

The constraint operator is the zero-extension central divergence.  A field
``v`` is projected as ``u = M v - M grad0(q)`` where ``M`` is the boundary
mask of the target space and ``q`` solves the least-squares normal
equations

    div0(M grad0(q)) = div0(M v).

That makes the projection orthogonal under the grid inner product (so it
can only shrink L2 norms), idempotent, and drives the constraint
divergence to solver tolerance at every cell, including the wall layers.

Two target spaces are provided:

- ``velocity``: all components vanish on the outermost cell layer
  (no-slip, field extended by zero outside the box);
- ``magnetic``: only the wall-normal component vanishes on its own wall
  layers (perfectly impermeable magnetic boundary), tangential components
  are free.

The normal-equation operator is symmetric negative semidefinite with an
8-dimensional kernel of sublattice-parity modes (the collocated-grid
checkerboard family).  Small grids use a sparse LU of the kernel-bordered
system; larger grids fall back to CG preconditioned with the exact inverse
of the unmasked operator, taken apart axis by axis (Kronecker form).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import stencils
from .grid import Grid, ScalarField, VectorField
from .solvers import LinearOperator, SolverError, solve_cg

__all__ = ["LerayProjector", "KroneckerSolve", "leray_project", "projector_for"]

_SPLU_CELL_LIMIT = 20000  # direct factorization up to ~27^3 cells


def _central_diff_matrix(n: int, h: float) -> sp.csr_matrix:
    """1D zero-extension central difference; exactly antisymmetric."""
    c = 0.5 / h
    return sp.diags([np.full(n - 1, c), np.full(n - 1, -c)], [1, -1], format="csr")


class KroneckerSolve:
    """Exact inverse of f(T (+) T (+) T) acting on the trailing 3 axes.

    T is a symmetric n x n one-dimensional operator; the three-axis
    Kronecker sum is diagonalized once per grid and applied with dense
    axis transforms.  ``f`` maps summed eigenvalues to the (positive)
    symbol of the operator being approximated.
    """

    def __init__(self, T: np.ndarray, f, floor_rel: float = 1e-12):
        w, V = np.linalg.eigh(0.5 * (T + T.T))
        self.V = np.ascontiguousarray(V)
        self.VT = np.ascontiguousarray(V.T)
        lam = w[:, None, None] + w[None, :, None] + w[None, None, :]
        denom = f(lam)
        floor = floor_rel * float(np.max(np.abs(denom)))
        self.denom = np.where(np.abs(denom) < floor, floor, denom)

    @staticmethod
    def _transform(v: np.ndarray, M: np.ndarray) -> np.ndarray:
        # dense axis transforms on the trailing three axes (BLAS-backed)
        nd = v.ndim
        t = np.tensordot(M, v, axes=(1, nd - 3))
        t = np.moveaxis(t, 0, nd - 3)
        t = np.tensordot(M, t, axes=(1, nd - 2))
        t = np.moveaxis(t, 0, nd - 2)
        t = np.tensordot(M, t, axes=(1, nd - 1))
        t = np.moveaxis(t, 0, nd - 1)
        return t

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Apply the inverse symbol; works on (n,n,n) or stacked (3,n,n,n)."""
        t = self._transform(v, self.VT)
        t /= self.denom
        return self._transform(t, self.V)


def _parity_basis(n: int) -> list[np.ndarray]:
    """The 8 sublattice-parity indicator modes, each of shape (n^3,)."""
    idx = np.indices((n, n, n)) % 2
    basis = []
    for px in (0, 1):
        for py in (0, 1):
            for pz in (0, 1):
                m = ((idx[0] == px) & (idx[1] == py) & (idx[2] == pz)).astype(float)
                basis.append(m.ravel())
    return basis


def _normal_equation_kernel(n: int, kind: str) -> np.ndarray:
    """Orthonormal kernel basis of the masked normal-equation operator.

    Both masks admit the 8 checkerboard parity modes.  The velocity mask
    additionally leaves the multiplier undetermined on shell cells with at
    least two extreme indices (edges and corners of the cube shell): the
    gradient there is never evaluated at a masked-interior cell.
    """
    cols = _parity_basis(n)
    if kind == "velocity":
        coords = np.indices((n, n, n))
        extreme = (coords == 0) | (coords == n - 1)
        edge = np.count_nonzero(extreme, axis=0) >= 2
        for flat in np.flatnonzero(edge.ravel()):
            e = np.zeros(n**3)
            e[flat] = 1.0
            cols.append(e)
        # make the parity modes edge-free so the family stays well conditioned
        mask = (~edge).ravel().astype(float)
        for i in range(8):
            cols[i] = cols[i] * mask
    q, _ = np.linalg.qr(np.array(cols).T)
    return np.ascontiguousarray(q.T)


@dataclass
class ProjectionInfo:
    iterations: int
    max_divergence: float
    backend: str


class LerayProjector:
    """Orthogonal projector onto the masked, divergence-free field space."""

    def __init__(self, grid: Grid, kind: str = "velocity"):
        if kind not in ("velocity", "magnetic"):
            raise ValueError(f"unknown projector kind {kind!r}")
        self.grid = grid
        self.kind = kind
        n, h = grid.n, grid.h
        if kind == "velocity":
            mask3 = np.broadcast_to(stencils.interior_mask(n), (3, n, n, n)).copy()
        else:
            mask3 = stencils.normal_component_masks(n)
        self.mask = mask3.astype(float)
        self._kernel = _normal_equation_kernel(n, kind)
        self._n3 = n**3
        if self._n3 <= _SPLU_CELL_LIMIT:
            self._backend = "splu"
            self._lu = self._factorize()
        else:
            self._backend = "pcg"
            D = _central_diff_matrix(n, h).toarray()
            # unmasked normal-equation symbol: sum over axes of D^T D
            self._kron = KroneckerSolve(D.T @ D, lambda lam: np.maximum(lam, 0.0))

    # -- direct backend -------------------------------------------------

    def _factorize(self):
        n, h = self.grid.n, self.grid.h
        D = _central_diff_matrix(n, h)
        eye = sp.identity(n, format="csr")
        D3 = [
            sp.kron(sp.kron(D, eye), eye, format="csr"),
            sp.kron(sp.kron(eye, D), eye, format="csr"),
            sp.kron(sp.kron(eye, eye), D, format="csr"),
        ]
        A = sp.csr_matrix((self._n3, self._n3))
        for a in range(3):
            Ma = sp.diags(self.mask[a].ravel())
            A = A + D3[a].T @ Ma @ D3[a]
        K = sp.csr_matrix(self._kernel.T)
        bordered = sp.bmat([[A, K], [K.T, None]], format="csc")
        return spla.splu(bordered, permc_spec="MMD_AT_PLUS_A")

    def _solve_direct(self, b: np.ndarray) -> np.ndarray:
        rhs = np.concatenate([b.ravel(), np.zeros(self._kernel.shape[0])])
        sol = self._lu.solve(rhs)
        return sol[: self._n3].reshape(b.shape)

    # -- iterative backend ----------------------------------------------

    def _neg_normal_op(self, q: np.ndarray) -> np.ndarray:
        g = self.mask * stencils.grad(q, self.grid.h, "zero")
        return -stencils.div(g, self.grid.h, "zero")

    def _kernel_free(self, q: np.ndarray) -> np.ndarray:
        flat = q.ravel()
        flat = flat - self._kernel.T @ (self._kernel @ flat)
        return flat.reshape(q.shape)

    def _solve_pcg(self, rhs: np.ndarray, tol_rel: float, max_iter: int):
        op = LinearOperator(self._neg_normal_op, symmetric=True, description="masked wide Laplacian")

        def precond(r):
            return self._kernel_free(self._kron.apply(r))

        q, report = solve_cg(op, rhs, tol=tol_rel, max_iter=max_iter, precond=precond)
        return self._kernel_free(q), report

    # -- public API ------------------------------------------------------

    def constraint_divergence(self, values: np.ndarray) -> np.ndarray:
        """The divergence this projector annihilates (zero-extension central)."""
        return stencils.div(values, self.grid.h, "zero")

    def project_only(self, values: np.ndarray) -> np.ndarray:
        """Single-pass projection without refinement or audit (solver hot path)."""
        w = self.mask * values
        b = stencils.div(w, self.grid.h, "zero")
        if self._backend == "splu":
            q = self._solve_direct(-b)
        else:
            q, _ = self._solve_pcg(-b, 1e-13, 4000)
        return w - self.mask * stencils.grad(q, self.grid.h, "zero")

    def multiplier_from(self, s: np.ndarray) -> np.ndarray:
        """Least-squares scalar whose masked gradient matches the field s.

        Used to report the pressure-like multiplier of a constrained solve:
        the momentum residual off the divergence-free space is a masked
        gradient, and this recovers its potential (kernel-free gauge).
        """
        b = stencils.div(s, self.grid.h, "zero")
        if self._backend == "splu":
            q = self._solve_direct(-b)
        else:
            q, _ = self._solve_pcg(-b, 1e-12, 4000)
        return self._kernel_free(q)

    def project_values(
        self, values: np.ndarray, tol: float = 1e-10, max_iter: int = 4000
    ) -> tuple[np.ndarray, np.ndarray, ProjectionInfo]:
        w = self.mask * values
        b = stencils.div(w, self.grid.h, "zero")
        scale = max(1.0, float(np.max(np.abs(values))) if values.size else 1.0)
        target = 10.0 * tol * scale
        iterations = 0
        q = np.zeros_like(b)
        # solve neg_normal_op(q) = -b, i.e. div0(mask * grad0(q)) = div0(w),
        # with iterative refinement; div0 of the projected field equals the
        # equation residual, so the stopping test is the post-condition.
        r_eq = -b
        for _ in range(5):
            if float(np.max(np.abs(r_eq))) <= target:
                break
            if self._backend == "splu":
                q += self._solve_direct(r_eq)
                iterations += 1
            else:
                r_norm = float(np.sqrt(np.sum(r_eq * r_eq)))
                tol_rel = min(0.05 * target / r_norm, 1e-2) if r_norm > 0 else 1.0
                dq, report = self._solve_pcg(r_eq, max(tol_rel, 1e-15), max_iter)
                q += dq
                iterations += report.iterations
            r_eq = -b - self._neg_normal_op(q)
        u = w - self.mask * stencils.grad(q, self.grid.h, "zero")
        div_u = stencils.div(u, self.grid.h, "zero")
        max_div = float(np.max(np.abs(div_u)))
        if max_div > target:
            raise SolverError(
                f"leray projection stalled: max divergence {max_div:.3e} > {target:.3e}"
            )
        q = self._kernel_free(q)
        return u, q, ProjectionInfo(iterations, max_div, self._backend)


_PROJECTOR_CACHE: dict[tuple[int, float, str], LerayProjector] = {}


def projector_for(grid: Grid, kind: str = "velocity") -> LerayProjector:
    key = (grid.n, grid.L, kind)
    proj = _PROJECTOR_CACHE.get(key)
    if proj is None:
        proj = LerayProjector(grid, kind)
        _PROJECTOR_CACHE[key] = proj
    return proj


def leray_project(
    v: VectorField, tol: float = 1e-10, kind: str = "velocity"
) -> tuple[VectorField, ScalarField]:
    """Project a vector field onto the divergence-free space.

    Returns the projected field and the scalar whose masked gradient was
    removed (the pressure-like multiplier, kernel-free gauge with zero
    mean).
    """
    proj = projector_for(v.grid, kind)
    u, q, _ = proj.project_values(v.values, tol=tol)
    return VectorField(v.grid, u), ScalarField(v.grid, q)
