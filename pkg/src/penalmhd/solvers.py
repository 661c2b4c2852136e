"""Matrix-free Krylov solvers over ndarray-valued unknowns.

Used wherever the scheme needs a coercive implicit solve: CG for the
symmetric operators (projection Poisson, induction), BiCGStab for the
nonsymmetric ones (density advection-diffusion, momentum).  Reductions go
through ``np.sum`` so a solve is deterministic for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = ["LinearOperator", "SolveReport", "SolverError", "solve_cg", "solve_bicgstab"]

_TINY = 1e-300


class SolverError(RuntimeError):
    """Raised by callers that cannot proceed after a failed solve."""

    def __init__(self, message: str, report: "SolveReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class LinearOperator:
    """Matrix-free linear operator.

    ``apply`` must be linear to rounding; the test suite checks
    apply(a*x + b*y) against a*apply(x) + b*apply(y) on random fields.
    """

    apply: Callable[[np.ndarray], np.ndarray]
    symmetric: bool = False
    description: str = ""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    reason: str = "converged"


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b))


def _norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(a * a)))


def solve_cg(
    op: LinearOperator,
    rhs: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 2000,
    x0: Optional[np.ndarray] = None,
    precond: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned conjugate gradients for SPD operators.

    Converges when ||rhs - op(x)||_2 <= tol * ||rhs||_2.  A non-positive
    curvature (operator not SPD on the iterate space) is reported as a
    breakdown, never silently ignored.
    """
    b_norm = _norm(rhs)
    if b_norm == 0.0:
        return np.zeros_like(rhs), SolveReport(0, 0.0, True)
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    r = rhs - op(x)
    target = tol * b_norm
    res = _norm(r)
    if res <= target:
        return x, SolveReport(0, res / b_norm, True)
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = _dot(r, z)
    for k in range(1, max_iter + 1):
        ap = op(p)
        curvature = _dot(p, ap)
        if curvature <= 0.0:
            return x, SolveReport(k, _norm(rhs - op(x)) / b_norm, False, "breakdown: nonpositive curvature")
        alpha = rz / curvature
        x += alpha * p
        r -= alpha * ap
        res = _norm(r)
        if res <= target:
            return x, SolveReport(k, res / b_norm, True)
        z = precond(r) if precond is not None else r
        rz_new = _dot(r, z)
        if abs(rz) < _TINY:
            return x, SolveReport(k, res / b_norm, False, "breakdown: rz underflow")
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolveReport(max_iter, res / b_norm, False, "max iterations reached")


def solve_bicgstab(
    op: LinearOperator,
    rhs: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 2000,
    x0: Optional[np.ndarray] = None,
    precond: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned BiCGStab for general invertible operators."""
    b_norm = _norm(rhs)
    if b_norm == 0.0:
        return np.zeros_like(rhs), SolveReport(0, 0.0, True)
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    r = rhs - op(x)
    target = tol * b_norm
    res = _norm(r)
    if res <= target:
        return x, SolveReport(0, res / b_norm, True)
    r_shadow = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(rhs)
    p = np.zeros_like(rhs)
    for k in range(1, max_iter + 1):
        rho_new = _dot(r_shadow, r)
        if abs(rho_new) < _TINY * b_norm * b_norm:
            return x, SolveReport(k, res / b_norm, False, "breakdown: rho underflow")
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        p_hat = precond(p) if precond is not None else p
        v = op(p_hat)
        denom = _dot(r_shadow, v)
        if abs(denom) < _TINY:
            return x, SolveReport(k, res / b_norm, False, "breakdown: shadow projection vanished")
        alpha = rho_new / denom
        s = r - alpha * v
        if _norm(s) <= target:
            x += alpha * p_hat
            res = _norm(rhs - op(x))
            return x, SolveReport(k, res / b_norm, res <= 10 * target)
        s_hat = precond(s) if precond is not None else s
        t = op(s_hat)
        tt = _dot(t, t)
        if tt < _TINY:
            return x, SolveReport(k, res / b_norm, False, "breakdown: stagnation")
        omega = _dot(t, s) / tt
        x += alpha * p_hat + omega * s_hat
        r = s - omega * t
        res = _norm(r)
        if res <= target:
            res = _norm(rhs - op(x))
            return x, SolveReport(k, res / b_norm, res <= 10 * target)
        if omega == 0.0:
            return x, SolveReport(k, res / b_norm, False, "breakdown: omega = 0")
        rho = rho_new
    return x, SolveReport(max_iter, res / b_norm, False, "max iterations reached")
