"""Symplectic potentials on a moment polytope and their Legendre duals.

A torus-invariant metric is stored as u = u_ref + v where u_ref is the
Guillemin potential (1/2) sum_i ell_i log ell_i built from the facet data
and v is a smooth function on the closed polytope.  Keeping the singular
reference analytic means no finite difference ever crosses the boundary;
only v is ever differentiated numerically, and polynomial v is
differentiated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from ._fd import masked_derivative
from .errors import NotAdmissible, PolytopeMismatch, TruncationTooSmall
from .polytope import InteriorGrid, MomentPolytope

__all__ = [
    "PolynomialMap", "AffineField", "SymplecticPotential", "KahlerSidePotential",
    "guillemin_potential", "make_potential", "check_admissible", "legendre_dual",
]


class PolynomialMap:
    """Polynomial in 1 or 2 variables with exact partial derivatives.

    Coefficients follow the numpy.polynomial convention: coef[i] x^i in one
    variable, coef[i, j] x^i y^j in two.
    """

    def __init__(self, coef, dimension: int):
        self.coef = np.atleast_1d(np.asarray(coef, dtype=float))
        self.dimension = dimension
        if dimension == 2 and self.coef.ndim == 1:
            self.coef = self.coef[:, None]

    def deriv(self, orders) -> "PolynomialMap":
        c = self.coef
        if self.dimension == 1:
            (ax,) = orders if isinstance(orders, (tuple, list)) else (orders,)
            for _ in range(ax):
                c = c[1:] * np.arange(1, len(c)) if len(c) > 1 else np.zeros(1)
            return PolynomialMap(c, 1)
        ax, ay = orders
        for _ in range(ax):
            c = c[1:, :] * np.arange(1, c.shape[0])[:, None] if c.shape[0] > 1 else np.zeros((1, c.shape[1]))
        for _ in range(ay):
            c = c[:, 1:] * np.arange(1, c.shape[1])[None, :] if c.shape[1] > 1 else np.zeros((c.shape[0], 1))
        return PolynomialMap(c, 2)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        if self.coef.size == 0 or not np.any(self.coef):
            return np.zeros(len(pts))
        if self.dimension == 1:
            return np.polynomial.polynomial.polyval(pts[:, 0], self.coef)
        return np.polynomial.polynomial.polyval2d(pts[:, 0], pts[:, 1], self.coef)

    def __mul__(self, s: float) -> "PolynomialMap":
        return PolynomialMap(self.coef * s, self.dimension)

    __rmul__ = __mul__

    def __add__(self, other: "PolynomialMap") -> "PolynomialMap":
        a, b = self.coef, other.coef
        if self.dimension == 1:
            n = max(len(a), len(b))
            out = np.zeros(n)
            out[:len(a)] += a
            out[:len(b)] += b
        else:
            out = np.zeros((max(a.shape[0], b.shape[0]), max(a.shape[1], b.shape[1])))
            out[:a.shape[0], :a.shape[1]] += a
            out[:b.shape[0], :b.shape[1]] += b
        return PolynomialMap(out, self.dimension)


@dataclass(frozen=True)
class AffineField:
    """Affine function <a, x> + b; the holomorphy potential of a torus field."""

    a: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", np.atleast_1d(np.asarray(self.a, dtype=float)))
        self.a.setflags(write=False)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(points) @ self.a + self.b

    def normalized(self, grid: InteriorGrid) -> "AffineField":
        """Shift the constant so the grid integral vanishes."""
        mean = float(np.sum(grid.weights * self(grid.nodes)) / grid.weights.sum())
        return AffineField(self.a, self.b - mean)

    def as_polynomial(self, dimension: int) -> PolynomialMap:
        if dimension == 1:
            return PolynomialMap([self.b, self.a[0]], 1)
        c = np.zeros((2, 2))
        c[0, 0] = self.b
        c[1, 0] = self.a[0]
        c[0, 1] = self.a[1]
        return PolynomialMap(c, 2)


def _guillemin_tensors(P: MomentPolytope, points: np.ndarray, max_order: int = 2):
    """Hessian of u_ref and its first/second derivatives, all closed form.

    Returns (H, dH, ddH) with shapes (N,n,n), (N,n,n,n), (N,n,n,n,n); the
    leading derivative indices come first: dH[:, a] = d_a H.
    """
    pts = np.atleast_2d(points)
    N, n = pts.shape
    ell = P.facet_values(pts)  # (N, F)
    H = np.zeros((N, n, n))
    dH = np.zeros((N, n, n, n)) if max_order >= 1 else None
    ddH = np.zeros((N, n, n, n, n)) if max_order >= 2 else None
    for k in range(P.n_facets):
        nu = P.normals[k].astype(float)
        nn = np.outer(nu, nu)
        lk = ell[:, k]
        H += 0.5 * nn[None, :, :] / lk[:, None, None]
        if max_order >= 1:
            for a in range(n):
                dH[:, a] += -0.5 * nu[a] * nn[None, :, :] / (lk ** 2)[:, None, None]
        if max_order >= 2:
            for a in range(n):
                for b in range(n):
                    ddH[:, a, b] += nu[a] * nu[b] * nn[None, :, :] / (lk ** 3)[:, None, None]
    return H, dH, ddH


def _guillemin_values(P: MomentPolytope, points: np.ndarray) -> np.ndarray:
    ell = P.facet_values(np.atleast_2d(points))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(ell > 0, ell * np.log(np.maximum(ell, 1e-300)), 0.0)
    return 0.5 * terms.sum(axis=1)


def _guillemin_gradient(P: MomentPolytope, points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(points)
    ell = P.facet_values(pts)
    grad = np.zeros_like(pts)
    for k in range(P.n_facets):
        nu = P.normals[k].astype(float)
        grad += 0.5 * (np.log(ell[:, k]) + 1.0)[:, None] * nu[None, :]
    return grad


@dataclass(frozen=True)
class SymplecticPotential:
    """One torus-invariant Kahler metric: u = u_ref + v on the grid.

    The Hessian at every interior node is cached eagerly; construction via
    :func:`make_potential` fails with :class:`NotAdmissible` when it is not
    positive definite, so instances are metrics by construction.
    """

    grid: InteriorGrid
    v: np.ndarray
    v_poly: PolynomialMap | None = None
    reference: str = "guillemin"     # "guillemin" or "none"
    hessian: np.ndarray = field(repr=False, default=None)   # (N, n, n)
    min_eig: float = field(default=np.nan)
    argmin_node: int = field(default=-1)

    def __post_init__(self):
        self.v.setflags(write=False)
        if self.hessian is not None:
            self.hessian.setflags(write=False)

    @property
    def polytope(self) -> MomentPolytope:
        return self.grid.polytope

    @property
    def dimension(self) -> int:
        return self.polytope.dimension

    # -- values and derivatives -------------------------------------------------

    def u_values(self, points: np.ndarray | None = None) -> np.ndarray:
        """u at arbitrary points (requires v_poly) or at the grid nodes."""
        if points is None:
            ref = _guillemin_values(self.polytope, self.grid.nodes) \
                if self.reference == "guillemin" else 0.0
            return ref + self.v
        if self.v_poly is None:
            raise PolytopeMismatch("off-grid evaluation needs a polynomial smooth part")
        ref = _guillemin_values(self.polytope, points) if self.reference == "guillemin" else 0.0
        return ref + self.v_poly(points)

    def gradient(self, points: np.ndarray | None = None) -> np.ndarray:
        if points is None:
            points = self.grid.nodes
            if self.v_poly is None:
                gv = self._v_derivative_grid(1)
                ref = _guillemin_gradient(self.polytope, points) \
                    if self.reference == "guillemin" else 0.0
                return ref + gv
        elif self.v_poly is None:
            raise PolytopeMismatch("off-grid gradients need a polynomial smooth part")
        ref = _guillemin_gradient(self.polytope, points) if self.reference == "guillemin" else 0.0
        n = self.dimension
        gv = np.stack([self.v_poly.deriv(_unit(n, a))(points) for a in range(n)], axis=1)
        return ref + gv

    def _v_derivative_grid(self, order: int) -> np.ndarray:
        """Gradient (order=1) of v at grid nodes by masked finite differences."""
        g = self.grid
        n = self.dimension
        box = g.to_box(self.v)
        if n == 1:
            out = masked_derivative(box[:, None], g.mask[:, None], g.h, (1, 0))
            return g.from_box(out[:, 0])[:, None] if out.ndim == 2 else out
        cols = []
        for a in range(n):
            orders = (1, 0) if a == 0 else (0, 1)
            cols.append(g.from_box(masked_derivative(box, g.mask, g.h, orders)))
        return np.stack(cols, axis=1)

    def hessian_tensors(self, points: np.ndarray | None = None, max_order: int = 2):
        """(H, dH, ddH) of u at grid nodes or arbitrary points (poly only)."""
        pts = self.grid.nodes if points is None else np.atleast_2d(points)
        n = self.dimension
        if self.reference == "guillemin":
            H, dH, ddH = _guillemin_tensors(self.polytope, pts, max_order)
        else:
            N = len(pts)
            H = np.zeros((N, n, n))
            dH = np.zeros((N, n, n, n)) if max_order >= 1 else None
            ddH = np.zeros((N, n, n, n, n)) if max_order >= 2 else None
        if self.v_poly is not None:
            dv = lambda orders: self.v_poly.deriv(orders)(pts)
        elif points is None:
            box = self.grid.to_box(self.v)
            msk = self.grid.mask
            if n == 1:
                box = box[:, None]
                msk = msk[:, None]
                dv = lambda orders: self.grid.from_box(
                    masked_derivative(box, msk, self.grid.h, (orders[0], 0))[:, 0])
            else:
                dv = lambda orders: self.grid.from_box(
                    masked_derivative(box, msk, self.grid.h, orders))
        else:
            raise PolytopeMismatch("off-grid Hessians need a polynomial smooth part")
        if n == 1:
            H[:, 0, 0] += dv((2,) if self.v_poly else (2, 0))
            if max_order >= 1:
                dH[:, 0, 0, 0] += dv((3,) if self.v_poly else (3, 0))
            if max_order >= 2:
                ddH[:, 0, 0, 0, 0] += dv((4,) if self.v_poly else (4, 0))
            return H, dH, ddH
        for i in range(n):
            for j in range(n):
                base = (int(i == 0) + int(j == 0), int(i == 1) + int(j == 1))
                H[:, i, j] += dv(base)
                if max_order >= 1:
                    for a in range(n):
                        o = (base[0] + int(a == 0), base[1] + int(a == 1))
                        dH[:, a, i, j] += dv(o)
                if max_order >= 2:
                    for a in range(n):
                        for b in range(n):
                            o = (base[0] + int(a == 0) + int(b == 0),
                                 base[1] + int(a == 1) + int(b == 1))
                            ddH[:, a, b, i, j] += dv(o)
        return H, dH, ddH

    # -- construction helpers ----------------------------------------------------

    def with_smooth_part(self, v=None, v_poly: PolynomialMap | None = None,
                         check: bool = True) -> "SymplecticPotential":
        return _construct(self.grid, v, v_poly, self.reference, check)

    def add(self, other_poly: PolynomialMap, check: bool = True) -> "SymplecticPotential":
        """u + p for a polynomial p (exact when this potential is polynomial)."""
        v = self.v + other_poly(self.grid.nodes)
        vp = self.v_poly + other_poly if self.v_poly is not None else None
        return _construct(self.grid, v, vp, self.reference, check)

    def add_affine(self, f: AffineField) -> "SymplecticPotential":
        """u + affine; Hessian data is reused bit for bit."""
        v = self.v + f(self.grid.nodes)
        vp = self.v_poly + f.as_polynomial(self.dimension) if self.v_poly is not None else None
        return SymplecticPotential(self.grid, v, vp, self.reference,
                                   self.hessian, self.min_eig, self.argmin_node)

    def resample(self, h: float) -> "SymplecticPotential":
        """Same metric on a finer/coarser grid (exact for polynomial v)."""
        g2 = self.polytope.interior_grid(h)
        if self.v_poly is not None:
            return _construct(g2, None, self.v_poly, self.reference, check=True)
        if self.dimension != 1:
            raise PolytopeMismatch("resampling a pure grid potential needs dimension 1")
        spline = CubicSpline(self.grid.nodes[:, 0], self.v, bc_type="natural")
        return _construct(g2, spline(g2.nodes[:, 0]), None, self.reference, check=True)

    def default_s_max(self, pad: float = 0.5) -> float:
        """Box half-width covering the gradient image of the grid core."""
        grads = self.gradient()
        core = self.grid.core
        pick = grads[core] if core.any() else grads
        return float(np.abs(pick).max() + pad)


def _unit(n: int, a: int):
    if n == 1:
        return (1,)
    return (1, 0) if a == 0 else (0, 1)


def _construct(grid: InteriorGrid, v, v_poly, reference: str, check: bool,
               atol: float = 0.0) -> SymplecticPotential:
    if v is None:
        if v_poly is None:
            v = np.zeros(grid.n_nodes)
        else:
            v = v_poly(grid.nodes)
    v = np.asarray(v, dtype=float)
    if v.shape != (grid.n_nodes,):
        raise PolytopeMismatch(
            f"smooth part has shape {v.shape}, grid has {grid.n_nodes} nodes")
    pot = SymplecticPotential(grid, v, v_poly, reference)
    H, _, _ = pot.hessian_tensors(max_order=0)
    eigs = np.linalg.eigvalsh(H) if grid.polytope.dimension > 1 else H[:, :, 0]
    mins = eigs.min(axis=1) if eigs.ndim == 2 else eigs
    k = int(np.argmin(mins))
    me = float(mins[k])
    if check and me <= atol:
        node = tuple(np.round(grid.nodes[k], 6))
        raise NotAdmissible(
            f"Hessian not positive definite: min eigenvalue {me:.6g} at node {node}",
            node=node, min_eigenvalue=me)
    return SymplecticPotential(grid, v, v_poly, reference, H, me, k)


def guillemin_potential(P: MomentPolytope, h: float | None = None) -> SymplecticPotential:
    """Canonical reference metric of the polytope (smooth part zero)."""
    if h is None:
        h = 1 / 64 if P.dimension == 1 else 1 / 48
    grid = P.interior_grid(h)
    return _construct(grid, None, PolynomialMap(np.zeros(1 if P.dimension == 1 else (1, 1)),
                                                P.dimension), "guillemin", check=True)


def make_potential(base: SymplecticPotential, v, v_poly: PolynomialMap | None = None
                   ) -> SymplecticPotential:
    """base + v; raises NotAdmissible with the worst node when it fails."""
    if callable(v) and not isinstance(v, np.ndarray):
        if isinstance(v, PolynomialMap):
            v_poly = v
            v = None
        else:
            v = np.asarray(v(base.grid.nodes), dtype=float)
    if v is None and v_poly is not None:
        vv = base.v + v_poly(base.grid.nodes)
    else:
        vv = base.v + np.asarray(v, dtype=float)
    vp = None
    if base.v_poly is not None and v_poly is not None:
        vp = base.v_poly + v_poly
    return _construct(base.grid, vv, vp, base.reference, check=True)


def check_admissible(u: SymplecticPotential) -> dict:
    """Diagnostic record: min Hessian eigenvalue, where, verdict."""
    return {
        "admissible": bool(u.min_eig > 0),
        "min_eigenvalue": float(u.min_eig),
        "node": tuple(np.round(u.grid.nodes[u.argmin_node], 8)) if u.argmin_node >= 0 else None,
    }


# -- Legendre transforms ----------------------------------------------------------


def legendre_values(u: SymplecticPotential, queries: np.ndarray,
                    refine: bool = True) -> np.ndarray:
    """psi_u(s) = sup_x <s,x> - u(x) at query slopes s.

    Dimension 1 solves u'(x) = s exactly (the Guillemin logs make u'
    surjective); dimension 2 maximizes over the grid with a second-order
    local correction from the cached Hessian.
    """
    q = np.atleast_2d(queries)
    if u.dimension == 1:
        return _legendre_1d(u, q[:, 0])[0]
    vals = u.u_values()
    psi = np.empty(len(q))
    best = np.empty(len(q), dtype=int)
    for lo in range(0, len(q), 1024):
        hi = min(lo + 1024, len(q))
        scores = q[lo:hi] @ u.grid.nodes.T - vals[None, :]
        b = np.argmax(scores, axis=1)
        best[lo:hi] = b
        psi[lo:hi] = scores[np.arange(hi - lo), b]
    if refine and u.hessian is not None:
        g = u.gradient()[best]
        H = u.hessian[best]
        d = q - g
        step = np.linalg.solve(H, d[..., None])[..., 0]
        corr = 0.5 * np.einsum("ni,ni->n", d, step)
        ok = np.abs(step).max(axis=1) <= 1.5 * u.grid.h
        psi = psi + np.where(ok, corr, 0.0)
    return psi


def _legendre_1d(u: SymplecticPotential, s: np.ndarray):
    P = u.polytope
    a, b = float(P.vertices.min()), float(P.vertices.max())
    if u.reference != "guillemin":
        if u.v_poly is not None:
            # exact: maximize s x - v(x) over [a, b] via critical points
            out = np.empty(len(s))
            xs = np.empty(len(s))
            dcoef = u.v_poly.deriv((1,)).coef
            for k, sv in enumerate(s):
                cand = [a, b]
                c = dcoef.copy()
                c[0] -= sv
                if len(c) > 1 and np.any(c[1:]):
                    roots = np.polynomial.polynomial.polyroots(c)
                    cand += [float(r.real) for r in roots
                             if abs(r.imag) < 1e-10 and a < r.real < b]
                cand = np.asarray(cand)
                vals = sv * cand - u.v_poly(cand[:, None])
                j = int(np.argmax(vals))
                out[k] = vals[j]
                xs[k] = cand[j]
            return out, xs
        vals = u.u_values()
        scores = s[:, None] * u.grid.nodes[:, 0][None, :] - vals[None, :]
        best = np.argmax(scores, axis=1)
        return scores[np.arange(len(s)), best], u.grid.nodes[best, 0]
    if u.v_poly is not None:
        dvp = u.v_poly.deriv((1,))
        vp = u.v_poly
        dv = lambda x: dvp(np.array([[x]]))[0]
        vfun = lambda x: vp(np.array([[x]]))[0]
    else:
        spl = CubicSpline(u.grid.nodes[:, 0], u.v, bc_type="natural")
        dspl = spl.derivative()
        dv = lambda x: float(dspl(x))
        vfun = lambda x: float(spl(x))
    lo, hi = a + 1e-14 * (b - a), b - 1e-14 * (b - a)

    def du(x, sv):
        return 0.5 * (np.log(x - a) - np.log(b - x)) + dv(x) - sv

    out = np.empty(len(s))
    xs = np.empty(len(s))
    for k, sv in enumerate(s):
        xk = brentq(du, lo, hi, args=(sv,), xtol=1e-15, maxiter=200)
        uref = 0.5 * ((xk - a) * np.log(max(xk - a, 1e-300))
                      + (b - xk) * np.log(max(b - xk, 1e-300)))
        out[k] = sv * xk - uref - vfun(xk)
        xs[k] = xk
    return out, xs


@dataclass(frozen=True)
class KahlerSidePotential:
    """Kahler-side potential psi on a truncated log-coordinate box."""

    source: SymplecticPotential
    s_max: float
    axes: tuple              # per-dimension 1-D arrays of log coordinates
    values: np.ndarray       # psi on the tensor grid over axes
    vertex_slopes: np.ndarray    # asymptotic slopes = polytope vertices
    vertex_offsets: np.ndarray   # asymptotic intercepts = -u(vertex)

    def grid_points(self) -> np.ndarray:
        if len(self.axes) == 1:
            return self.axes[0][:, None]
        A, B = np.meshgrid(self.axes[0], self.axes[1], indexing="ij")
        return np.stack([A.ravel(), B.ravel()], axis=1)

    def convexity_defect(self) -> float:
        """Most negative discrete second difference along the axes."""
        worst = np.inf
        vals = self.values
        if vals.ndim == 1:
            d2 = np.diff(vals, 2)
            worst = min(worst, d2.min())
        else:
            worst = min(worst, np.diff(vals, 2, axis=0).min())
            worst = min(worst, np.diff(vals, 2, axis=1).min())
        return float(worst)

    def dual_back(self) -> np.ndarray:
        """Legendre transform back onto the source grid nodes (involution check)."""
        pts = self.grid_points()
        nodes = self.source.grid.nodes
        flat = self.values.ravel()
        out = np.full(len(nodes), -np.inf)
        for lo in range(0, len(pts), 2048):
            hi = min(lo + 2048, len(pts))
            scores = nodes @ pts[lo:hi].T - flat[None, lo:hi]
            out = np.maximum(out, scores.max(axis=1))
        return out


def legendre_dual(u: SymplecticPotential, s_max: float | None = None,
                  n_per_axis: int | None = None) -> KahlerSidePotential:
    """Legendre dual of u on the box [-s_max, s_max]^n.

    Raises TruncationTooSmall when the box fails to cover the gradient image
    of the grid core (the duality inverse would then miss part of P).
    """
    if s_max is None:
        s_max = u.default_s_max()
    core = u.grid.core
    grads = u.gradient()[core] if core.any() else u.gradient()
    need = float(np.abs(grads).max())
    if need > s_max:
        raise TruncationTooSmall(
            f"gradient image needs |s| up to {need:.3f}, box has {s_max:.3f}")
    if n_per_axis is None:
        if u.dimension == 1:
            n_per_axis = min(max(65, int(np.ceil(2 * s_max / u.grid.h ** 0.75))), 257)
        else:
            n_per_axis = 81
    axes = tuple(np.linspace(-s_max, s_max, n_per_axis) for _ in range(u.dimension))
    if u.dimension == 1:
        vals = legendre_values(u, axes[0][:, None])
    else:
        A, B = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.stack([A.ravel(), B.ravel()], axis=1)
        vals = legendre_values(u, pts).reshape(n_per_axis, n_per_axis)
    verts = u.polytope.vertices
    offsets = -_vertex_u_values(u)
    return KahlerSidePotential(u, float(s_max), axes, vals, verts, offsets)


def _vertex_u_values(u: SymplecticPotential) -> np.ndarray:
    verts = u.polytope.vertices
    # u_ref -> 0 at vertices (ell log ell -> 0); v extends continuously
    if u.v_poly is not None:
        return u.v_poly(verts)
    out = []
    for v in verts:
        k = int(np.argmin(np.linalg.norm(u.grid.nodes - v[None, :], axis=1)))
        out.append(u.v[k])
    return np.asarray(out)
