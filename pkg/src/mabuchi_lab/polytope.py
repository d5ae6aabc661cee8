"""Delzant moment polytopes with interior and boundary quadrature.

Every manifold integral in this symmetry class reduces to a polytope
integral, so the polytope plus its two measures is the entire "manifold"
the rest of the package sees.  The boundary measure is normalized facet by
facet so the primitive integer normal has unit length; with that convention
the affine integration-by-parts identities used as Futaki oracles are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from .errors import GridMismatch, NotDelzant, Unbounded

__all__ = [
    "MomentPolytope", "InteriorGrid", "BoundaryMeasure",
    "make_polytope", "integrate_interior", "integrate_boundary",
    "unimodular_image",
]

_NAMED = {
    # CP^1: unit segment
    "P1": [((1,), 0), ((-1,), -1)],
    # CP^2: unit simplex
    "P2": [((1, 0), 0), ((0, 1), 0), ((-1, -1), -1)],
    # blow-up of CP^2: trapezoid {x,y >= 0, x+y <= 2, x <= 1}
    "PF1": [((1, 0), 0), ((0, 1), 0), ((-1, -1), -2), ((-1, 0), -1)],
}

_GRID_CACHE: dict = {}
_BOUNDARY_CACHE: dict = {}


@dataclass(frozen=True)
class MomentPolytope:
    """Compact Delzant polytope { x : <nu_i, x> >= lam_i }."""

    dimension: int
    normals: np.ndarray      # (n_facets, dim) primitive integer rows
    offsets: np.ndarray      # (n_facets,)
    vertices: np.ndarray     # (n_vertices, dim)
    name: str = "custom"

    def __post_init__(self):
        self.normals.setflags(write=False)
        self.offsets.setflags(write=False)
        self.vertices.setflags(write=False)

    @property
    def n_facets(self) -> int:
        return len(self.offsets)

    def facet_values(self, points: np.ndarray) -> np.ndarray:
        """ell_i(x) = <nu_i, x> - lam_i for each facet, shape (npts, n_facets)."""
        pts = np.atleast_2d(points)
        return pts @ self.normals.T - self.offsets[None, :]

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        return (self.facet_values(points) >= -tol).all(axis=1)

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance to the nearest facet hyperplane."""
        ell = self.facet_values(points)
        scale = np.linalg.norm(self.normals, axis=1)
        return (ell / scale[None, :]).min(axis=1)

    def volume(self) -> float:
        if self.dimension == 1:
            return float(self.vertices.max() - self.vertices.min())
        # fan triangulation from the vertex centroid (convex)
        verts = _sort_ccw(self.vertices)
        c = verts.mean(axis=0)
        area = 0.0
        for k in range(len(verts)):
            a = verts[k] - c
            b = verts[(k + 1) % len(verts)] - c
            area += abs(a[0] * b[1] - a[1] * b[0]) / 2.0
        return float(area)

    def lattice_perimeter(self) -> float:
        """Total boundary mass of the lattice measure d(sigma)."""
        return float(sum(self.facet_lattice_lengths()))

    def facet_lattice_lengths(self) -> list[float]:
        if self.dimension == 1:
            return [1.0, 1.0]  # counting measure on the two endpoints
        out = []
        for i in range(self.n_facets):
            a, b = self._facet_segment(i)
            out.append(float(np.linalg.norm(b - a) / np.linalg.norm(self.normals[i])))
        return out

    def _facet_segment(self, i: int):
        ell = self.facet_values(self.vertices)[:, i]
        on = self.vertices[np.abs(ell) < 1e-9]
        if len(on) != 2:
            raise GridMismatch(f"facet {i} does not have exactly two vertices")
        return on[0], on[1]

    def signature(self) -> tuple:
        return (self.dimension,
                tuple(map(tuple, self.normals.tolist())),
                tuple(self.offsets.tolist()))

    def interior_grid(self, h: float) -> "InteriorGrid":
        key = (self.signature(), float(h))
        got = _GRID_CACHE.get(key)
        if got is None:
            got = _build_grid(self, h)
            _GRID_CACHE[key] = got
        return got

    def boundary_measure(self, nodes_per_facet: int = 16) -> "BoundaryMeasure":
        key = (self.signature(), nodes_per_facet)
        got = _BOUNDARY_CACHE.get(key)
        if got is None:
            got = _build_boundary(self, nodes_per_facet)
            _BOUNDARY_CACHE[key] = got
        return got


@dataclass(frozen=True)
class InteriorGrid:
    """Uniform tensor grid clipped to the polytope.

    Nodes sit at the centroids of the clipped cells, weights are the exact
    cell-polytope intersection areas.  ``core`` flags nodes at distance
    >= h from the boundary; the rest are the near-boundary ring.
    """

    polytope: MomentPolytope
    h: float
    nodes: np.ndarray        # (N, dim) centroids
    weights: np.ndarray      # (N,) exact clipped areas
    core: np.ndarray         # (N,) bool, distance >= h
    lattice: np.ndarray      # (N, dim) int cell indices in the bounding box
    shape: tuple             # bounding-box grid shape
    mask: np.ndarray = field(repr=False, default=None)  # bool array of `shape`

    def __post_init__(self):
        for a in (self.nodes, self.weights, self.core, self.lattice):
            a.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.weights)

    def to_box(self, values: np.ndarray) -> np.ndarray:
        """Scatter node values onto the bounding-box array (0 outside)."""
        out = np.zeros(self.shape)
        out[tuple(self.lattice.T)] = values
        return out

    def from_box(self, arr: np.ndarray) -> np.ndarray:
        return arr[tuple(self.lattice.T)]


@dataclass(frozen=True)
class BoundaryMeasure:
    """Per-facet quadrature for the lattice boundary measure d(sigma).

    For dimension 1 this is the counting measure on the two endpoints; in
    dimension 2 each facet carries a Gauss-Legendre rule whose weights sum
    to the facet's lattice length.
    """

    polytope: MomentPolytope
    nodes: np.ndarray        # (M, dim)
    weights: np.ndarray      # (M,)
    facet_index: np.ndarray  # (M,) which facet each node belongs to

    def __post_init__(self):
        for a in (self.nodes, self.weights, self.facet_index):
            a.setflags(write=False)


def _sort_ccw(verts: np.ndarray) -> np.ndarray:
    c = verts.mean(axis=0)
    ang = np.arctan2(verts[:, 1] - c[1], verts[:, 0] - c[0])
    return verts[np.argsort(ang)]


def _primitive_check(normals) -> None:
    for nu in normals:
        ints = [int(round(c)) for c in nu]
        if any(abs(c - r) > 1e-12 for c, r in zip(nu, ints)):
            raise NotDelzant(f"facet normal {tuple(nu)} is not an integer vector")
        if math.gcd(*(abs(c) for c in ints)) not in (1,):
            raise NotDelzant(f"facet normal {tuple(ints)} is not primitive")


def _enumerate_vertices(normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    dim = normals.shape[1]
    verts = []
    if dim == 1:
        for i in range(len(offsets)):
            x = offsets[i] / normals[i, 0]
            if (normals[:, 0] * x - offsets >= -1e-9).all():
                verts.append([x])
    else:
        for i in range(len(offsets)):
            for j in range(i + 1, len(offsets)):
                A = normals[[i, j]].astype(float)
                det = np.linalg.det(A)
                if abs(det) < 1e-12:
                    continue
                x = np.linalg.solve(A, offsets[[i, j]].astype(float))
                if (normals @ x - offsets >= -1e-9).all():
                    verts.append(x)
    if not verts:
        raise Unbounded("facet list has no vertices; empty or unbounded region")
    verts = np.unique(np.round(np.asarray(verts, dtype=float), 12), axis=0)
    return verts


def _check_bounded(normals: np.ndarray) -> None:
    # bounded iff the recession cone {d : <nu_i, d> >= 0} is {0}
    dim = normals.shape[1]
    for sign in (1.0, -1.0):
        for k in range(dim):
            c = np.zeros(dim)
            c[k] = -sign  # maximize sign * d_k
            res = linprog(c, A_ub=-normals, b_ub=np.zeros(len(normals)),
                          bounds=[(-1, 1)] * dim, method="highs")
            if res.status == 0 and -res.fun > 1e-9:
                raise Unbounded("facet list does not bound: recession direction found")


def _check_delzant(poly_dim: int, normals: np.ndarray, offsets: np.ndarray,
                   vertices: np.ndarray) -> None:
    for v in vertices:
        ell = normals @ v - offsets
        tight = np.flatnonzero(np.abs(ell) < 1e-9)
        if len(tight) != poly_dim:
            raise NotDelzant(
                f"vertex {tuple(v)} lies on {len(tight)} facets, expected {poly_dim}")
        if poly_dim == 2:
            det = round(float(np.linalg.det(normals[tight].astype(float))))
            if abs(det) != 1:
                raise NotDelzant(
                    f"vertex {tuple(v)}: facet normals have determinant {det}, not +-1")
        else:
            if abs(int(round(normals[tight[0], 0]))) != 1:
                raise NotDelzant(f"vertex {tuple(v)}: normal not +-1")


def make_polytope(spec, name: str | None = None) -> MomentPolytope:
    """Build and validate a Delzant polytope.

    ``spec`` is either a named model ("P1", "P2", "PF1") or a list of
    (normal, offset) pairs defining { x : <normal, x> >= offset }.  Offsets
    may be ints, floats or Fractions.
    """
    if isinstance(spec, str):
        if spec not in _NAMED:
            raise NotDelzant(f"unknown polytope name {spec!r}")
        facets = _NAMED[spec]
        name = spec
    else:
        facets = list(spec)
        name = name or "custom"
    normals = np.array([f[0] for f in facets], dtype=float)
    offsets = np.array([float(Fraction(f[1])) if isinstance(f[1], str) else float(f[1])
                        for f in facets])
    if normals.ndim != 2:
        raise NotDelzant("facet normals must all have the same dimension")
    dim = normals.shape[1]
    if dim not in (1, 2):
        raise NotDelzant("only dimensions 1 and 2 are supported")
    _primitive_check(normals)
    _check_bounded(normals)
    vertices = _enumerate_vertices(normals, offsets)
    _check_delzant(dim, normals, offsets, vertices)
    normals_i = np.round(normals).astype(int)
    return MomentPolytope(dim, normals_i, offsets, vertices, name)


def unimodular_image(P: MomentPolytope, A, b) -> MomentPolytope:
    """Image of P under x -> A x + b with A in GL_n(Z).

    Normals map by the inverse transpose, which is again integral.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if abs(abs(np.linalg.det(A)) - 1) > 1e-9:
        raise NotDelzant("transformation is not unimodular")
    # y in A.P + b  <=>  <A^{-T} nu, y> >= lam + <A^{-T} nu, b>
    M = np.linalg.inv(A).T
    nn = np.round(M @ P.normals.T).T
    oo = P.offsets + nn @ b
    facets = [(tuple(int(round(c)) for c in nu), float(o)) for nu, o in zip(nn, oo)]
    return make_polytope(facets, name=f"{P.name}~")


def _build_grid(P: MomentPolytope, h: float) -> InteriorGrid:
    if P.dimension == 1:
        a = float(P.vertices.min())
        b = float(P.vertices.max())
        k0 = math.floor(a / h - 1e-12)
        k1 = math.ceil(b / h + 1e-12)
        nodes, wts, latt = [], [], []
        for k in range(k0, k1):
            lo, hi = max(k * h, a), min((k + 1) * h, b)
            if hi - lo <= 1e-14:
                continue
            nodes.append([(lo + hi) / 2])
            wts.append(hi - lo)
            latt.append([k - k0])
        nodes = np.asarray(nodes)
        weights = np.asarray(wts)
        lattice = np.asarray(latt, dtype=int)
        shape = (int(lattice[:, 0].max()) + 1,)
    else:
        from shapely.geometry import Polygon, box as shp_box

        poly = Polygon(_sort_ccw(P.vertices))
        xmin, ymin = P.vertices.min(axis=0)
        xmax, ymax = P.vertices.max(axis=0)
        i0, i1 = math.floor(xmin / h - 1e-12), math.ceil(xmax / h + 1e-12)
        j0, j1 = math.floor(ymin / h - 1e-12), math.ceil(ymax / h + 1e-12)
        ii, jj = np.meshgrid(np.arange(i0, i1), np.arange(j0, j1), indexing="ij")
        ii = ii.ravel()
        jj = jj.ravel()
        centers = np.stack([(ii + 0.5) * h, (jj + 0.5) * h], axis=1)
        dist = P.boundary_distance(centers)
        deep = (dist >= h * math.sqrt(2)) & P.contains(centers)
        nodes = list(centers[deep])
        wts = [h * h] * int(deep.sum())
        latt = [[i - i0, j - j0] for i, j in zip(ii[deep], jj[deep])]
        for i, j in zip(ii[~deep], jj[~deep]):
            cell = shp_box(i * h, j * h, (i + 1) * h, (j + 1) * h)
            inter = cell.intersection(poly)
            if inter.is_empty or inter.area <= 1e-15:
                continue
            c = inter.centroid
            nodes.append(np.array([c.x, c.y]))
            wts.append(inter.area)
            latt.append([i - i0, j - j0])
        nodes = np.asarray(nodes)
        weights = np.asarray(wts)
        lattice = np.asarray(latt, dtype=int)
        shape = tuple(lattice.max(axis=0) + 1)
    core = P.boundary_distance(nodes) >= h - 1e-12
    mask = np.zeros(shape, dtype=bool)
    mask[tuple(lattice.T)] = True
    mask.setflags(write=False)
    return InteriorGrid(P, float(h), nodes, weights, core, lattice, shape, mask)


def _build_boundary(P: MomentPolytope, nodes_per_facet: int) -> BoundaryMeasure:
    if P.dimension == 1:
        a, b = float(P.vertices.min()), float(P.vertices.max())
        nodes = np.array([[a], [b]])
        weights = np.array([1.0, 1.0])
        fidx = np.array([0, 1])
        return BoundaryMeasure(P, nodes, weights, fidx)
    pts, wts, fidx = [], [], []
    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes_per_facet)
    gl_x = (gl_x + 1) / 2
    gl_w = gl_w / 2
    lengths = P.facet_lattice_lengths()
    for i in range(P.n_facets):
        a, b = P._facet_segment(i)
        for t, w in zip(gl_x, gl_w):
            pts.append(a + t * (b - a))
            wts.append(w * lengths[i])
            fidx.append(i)
    return BoundaryMeasure(P, np.asarray(pts), np.asarray(wts),
                           np.asarray(fidx, dtype=int))


def integrate_interior(P: MomentPolytope, grid: InteriorGrid, f) -> float:
    """Quadrature of int_P f dx; f is node values or a callable."""
    if grid.polytope is not P and grid.polytope.signature() != P.signature():
        raise GridMismatch("grid was built for a different polytope")
    vals = f(grid.nodes) if callable(f) else np.asarray(f, dtype=float)
    if vals.shape != (grid.n_nodes,):
        raise GridMismatch(
            f"grid function has shape {vals.shape}, grid has {grid.n_nodes} nodes")
    return float(np.sum(grid.weights * vals))


def integrate_boundary(P: MomentPolytope, bm: BoundaryMeasure, f) -> float:
    """Quadrature of int_{dP} f dsigma against the lattice measure."""
    if bm.polytope is not P and bm.polytope.signature() != P.signature():
        raise GridMismatch("boundary measure was built for a different polytope")
    vals = f(bm.nodes) if callable(f) else np.asarray(f, dtype=float)
    if vals.shape != (len(bm.weights),):
        raise GridMismatch(
            f"boundary function has shape {vals.shape}, measure has {len(bm.weights)} nodes")
    return float(np.sum(bm.weights * vals))
