"""Finite-difference stencils on uniform grid lines.

Weights come from Fornberg's recursion, so centered and end-shifted stencils
fall out of the same code path.  With the default 7-point stencils every
derivative of order <= 4 is exact on polynomials of degree <= 6, which is
what keeps the curvature fields of polynomial test potentials at roundoff
accuracy all the way to the boundary.
"""

from __future__ import annotations

import numpy as np

__all__ = ["fd_weights", "line_derivative", "masked_derivative"]


def fd_weights(z: float, nodes: np.ndarray, order: int) -> np.ndarray:
    """Weights for derivatives 0..order at z from arbitrary 1-D nodes.

    Returns an array of shape (len(nodes), order + 1); column m holds the
    weights of the m-th derivative.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    c = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = nodes[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - z
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


_WEIGHT_CACHE: dict[tuple[int, int, int], np.ndarray] = {}


def _stencil_matrix(n: int, order: int, npts: int) -> np.ndarray:
    """Dense (n, n) derivative operator for a line of n equispaced nodes."""
    key = (n, order, npts)
    got = _WEIGHT_CACHE.get(key)
    if got is not None:
        return got
    npts = min(npts, n)
    half = npts // 2
    A = np.zeros((n, n))
    offs = np.arange(npts, dtype=float)
    for i in range(n):
        lo = min(max(i - half, 0), n - npts)
        w = fd_weights(float(i), lo + offs, order)[:, order]
        A[i, lo:lo + npts] = w
    _WEIGHT_CACHE[key] = A
    return A


def line_derivative(values: np.ndarray, h: float, order: int, npts: int = 7) -> np.ndarray:
    """order-th derivative along a line of equispaced values (spacing h)."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    if order == 0:
        return values.copy()
    if n == 1:
        # a single node carries no derivative information
        return np.zeros_like(values)
    A = _stencil_matrix(n, order, npts)
    return values @ A.T / h**order


def masked_derivative(arr: np.ndarray, mask: np.ndarray, h: float,
                      orders: tuple[int, ...], npts: int = 7) -> np.ndarray:
    """Mixed partial derivative of a masked 2-D tensor-grid function.

    ``arr`` holds values on the full bounding-box grid, valid where ``mask``
    is True.  The valid set must be line-convex (each row/column a contiguous
    run), which holds for convex polytopes.  ``orders = (ax, ay)`` applies
    d^ax/dx^ax then d^ay/dy^ay; entries outside the mask are returned as 0.
    """
    out = np.array(arr, dtype=float)
    ax, ay = orders
    for axis, order in ((0, ax), (1, ay)):
        if order == 0:
            continue
        res = np.zeros_like(out)
        work = out if axis == 0 else out.T
        tgt = res if axis == 0 else res.T
        msk = mask if axis == 0 else mask.T
        for j in range(work.shape[1]):
            col = msk[:, j]
            if not col.any():
                continue
            idx = np.flatnonzero(col)
            lo, hi = idx[0], idx[-1] + 1
            tgt[lo:hi, j] = line_derivative(work[lo:hi, j], h, order, npts)
        out = res
    out[~mask] = 0.0
    return out
