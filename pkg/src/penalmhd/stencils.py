"""Array-level finite-difference kernels on uniform cell-centered grids.

All kernels act on the last three axes of a float64 array, so the same
routine serves scalar fields (n,n,n) and stacked vector components
(3,n,n,n).  Three boundary closures are provided:

- ``zero``:    ghost values are 0 (field extended by zero outside the box).
               The resulting 1D difference matrix is exactly antisymmetric,
               which the energy audit relies on.
- ``mirror``:  ghost equals the adjacent interior value (homogeneous
               Neumann closure, used for the density).
- ``onesided``: second-order one-sided differences at the boundary
               (general-purpose variant for analytic fields).

The compact Laplacians are the standard 7-point stencils with the matching
ghost treatment.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "diff",
    "grad",
    "div",
    "curl",
    "laplacian",
    "cross",
    "interior_mask",
    "normal_component_masks",
]

_CLOSURES = ("zero", "mirror", "onesided")


def _sl(nd: int, axis: int, s: slice | int) -> tuple:
    """Index tuple selecting ``s`` along one of the three trailing axes."""
    idx = [slice(None)] * nd
    idx[nd - 3 + axis] = s
    return tuple(idx)


def diff(v: np.ndarray, axis: int, h: float, closure: str = "zero") -> np.ndarray:
    """First derivative along ``axis`` (0..2), central in the interior."""
    if closure not in _CLOSURES:
        raise ValueError(f"unknown closure {closure!r}")
    nd = v.ndim
    out = np.empty_like(v)
    c = 0.5 / h
    out[_sl(nd, axis, slice(1, -1))] = c * (
        v[_sl(nd, axis, slice(2, None))] - v[_sl(nd, axis, slice(None, -2))]
    )
    lo, hi = _sl(nd, axis, 0), _sl(nd, axis, -1)
    if closure == "zero":
        out[lo] = c * v[_sl(nd, axis, 1)]
        out[hi] = -c * v[_sl(nd, axis, -2)]
    elif closure == "mirror":
        out[lo] = c * (v[_sl(nd, axis, 1)] - v[lo])
        out[hi] = c * (v[hi] - v[_sl(nd, axis, -2)])
    else:
        out[lo] = c * (-3.0 * v[lo] + 4.0 * v[_sl(nd, axis, 1)] - v[_sl(nd, axis, 2)])
        out[hi] = c * (3.0 * v[hi] - 4.0 * v[_sl(nd, axis, -2)] + v[_sl(nd, axis, -3)])
    return out


def grad(q: np.ndarray, h: float, closure: str = "zero") -> np.ndarray:
    """Gradient of a scalar field, stacked as shape (3, n, n, n)."""
    return np.stack([diff(q, a, h, closure) for a in range(3)])


def div(u: np.ndarray, h: float, closure: str = "zero") -> np.ndarray:
    """Divergence of a vector field of shape (3, n, n, n)."""
    out = diff(u[0], 0, h, closure)
    out += diff(u[1], 1, h, closure)
    out += diff(u[2], 2, h, closure)
    return out


def curl(u: np.ndarray, h: float, closure: str = "zero") -> np.ndarray:
    """Curl of a vector field of shape (3, n, n, n).

    With the ``zero`` closure the three 1D difference matrices are
    antisymmetric, which makes this operator exactly self-adjoint under the
    plain grid inner product and makes div(curl(.)) vanish to rounding.
    """
    dyz = diff(u[2], 1, h, closure)
    dzy = diff(u[1], 2, h, closure)
    dzx = diff(u[0], 2, h, closure)
    dxz = diff(u[2], 0, h, closure)
    dxy = diff(u[1], 0, h, closure)
    dyx = diff(u[0], 1, h, closure)
    return np.stack([dyz - dzy, dzx - dxz, dxy - dyx])


def laplacian(v: np.ndarray, h: float, closure: str = "zero") -> np.ndarray:
    """Compact 7-point Laplacian acting on the three trailing axes."""
    nd = v.ndim
    out = np.zeros_like(v)
    inv_h2 = 1.0 / (h * h)
    for axis in range(3):
        mid = _sl(nd, axis, slice(1, -1))
        out[mid] += (
            v[_sl(nd, axis, slice(2, None))]
            - 2.0 * v[mid]
            + v[_sl(nd, axis, slice(None, -2))]
        ) * inv_h2
        lo, hi = _sl(nd, axis, 0), _sl(nd, axis, -1)
        if closure == "zero":
            out[lo] += (v[_sl(nd, axis, 1)] - 2.0 * v[lo]) * inv_h2
            out[hi] += (v[_sl(nd, axis, -2)] - 2.0 * v[hi]) * inv_h2
        elif closure == "mirror":
            out[lo] += (v[_sl(nd, axis, 1)] - v[lo]) * inv_h2
            out[hi] += (v[_sl(nd, axis, -2)] - v[hi]) * inv_h2
        else:
            # second-order one-sided second derivative (4-point)
            out[lo] += (
                2.0 * v[lo]
                - 5.0 * v[_sl(nd, axis, 1)]
                + 4.0 * v[_sl(nd, axis, 2)]
                - v[_sl(nd, axis, 3)]
            ) * inv_h2
            out[hi] += (
                2.0 * v[hi]
                - 5.0 * v[_sl(nd, axis, -2)]
                + 4.0 * v[_sl(nd, axis, -3)]
                - v[_sl(nd, axis, -4)]
            ) * inv_h2
    return out


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise cross product of two (3, ...) stacks."""
    return np.stack(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def interior_mask(n: int) -> np.ndarray:
    """Boolean (n,n,n) mask that is False on the outermost cell layer."""
    m = np.zeros((n, n, n), dtype=bool)
    m[1:-1, 1:-1, 1:-1] = True
    return m


def normal_component_masks(n: int) -> np.ndarray:
    """Boolean (3,n,n,n) mask zeroing each component on its own wall layers.

    Component a is False on the two cell layers normal to axis a, which is
    the collocated realization of a vanishing wall-normal component.
    """
    m = np.ones((3, n, n, n), dtype=bool)
    m[0, 0, :, :] = False
    m[0, -1, :, :] = False
    m[1, :, 0, :] = False
    m[1, :, -1, :] = False
    m[2, :, :, 0] = False
    m[2, :, :, -1] = False
    return m
