"""Futaki invariant, Futaki-Mabuchi form, extremal field and Hwang's bound.

In the torus model the holomorphy potentials of the symmetry algebra are
exactly the affine functions of the moment coordinates, the invariant
measure is Lebesgue for every metric, and the kernel of the Lichnerowicz
operator is the affine span.  Metric-independence of the bilinear form is
then exact; metric-independence of the Futaki integral is a genuine test
of the curvature discretization and is checked against the boundary-measure
oracle valid for affine functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularGram
from .functionals import calabi_energy, curvature_moment, s_bar, scalar_curvature
from .polytope import MomentPolytope, integrate_boundary
from .potentials import AffineField, SymplecticPotential

__all__ = [
    "HolomorphyPotential", "ExtremalField",
    "theta_of_affine", "futaki_invariant", "futaki_boundary_oracle",
    "fm_inner", "extremal_field", "hwang_bound",
]


@dataclass(frozen=True)
class HolomorphyPotential:
    """Normalized potential of a torus field at a given metric."""

    field: AffineField
    normalized: AffineField
    metric: SymplecticPotential
    constant: float          # subtracted mean

    def __call__(self, points):
        return self.normalized(points)


def theta_of_affine(f: AffineField, u: SymplecticPotential) -> HolomorphyPotential:
    """theta = f minus its mean against the invariant measure of u.

    The invariant measure of every admissible metric reduces to Lebesgue
    measure on P, so the constant depends only on the polytope.
    """
    g = u.grid
    mean = float(np.sum(g.weights * f(g.nodes)) / g.weights.sum())
    return HolomorphyPotential(f, AffineField(f.a, f.b - mean), u, mean)


def futaki_invariant(f: AffineField, u: SymplecticPotential, refine: bool = True) -> float:
    """F_f = int_P theta_f (S_bar - S(u)) dx by direct quadrature.

    Adding a constant to f does not change the value because S - S_bar has
    zero mass; the normalization is therefore left to the caller's taste.
    """
    return curvature_moment(u, f, refine=refine)


def futaki_boundary_oracle(f: AffineField, P: MomentPolytope) -> float:
    """Independent route for affine f: S_bar int_P f dx - 2 int_dP f dsigma."""
    grid = P.interior_grid(1 / 64 if P.dimension == 1 else 1 / 48)
    bm = P.boundary_measure()
    interior = float(np.sum(grid.weights * f(grid.nodes)))
    boundary = integrate_boundary(P, bm, f(bm.nodes))
    return s_bar(P) * interior - 2.0 * boundary


def fm_inner(f: AffineField, g: AffineField, u: SymplecticPotential) -> float:
    """Futaki-Mabuchi pairing (X_f, X_g) = int_P theta_f theta_g dx."""
    gr = u.grid
    tf = theta_of_affine(f, u).normalized(gr.nodes)
    tg = theta_of_affine(g, u).normalized(gr.nodes)
    return float(np.sum(gr.weights * tf * tg))


@dataclass(frozen=True)
class ExtremalField:
    """A-priori extremal field: Riesz representative of the Futaki character."""

    polytope: MomentPolytope
    coefficients: np.ndarray   # (dim + 1,): [constant, x_1, ..., x_n]
    futaki_value: float        # F_{X_c} = (X_c, X_c)
    gram: np.ndarray           # moment matrix on the raw affine basis
    futaki_rhs: np.ndarray     # Futaki values of the basis

    def potential(self) -> AffineField:
        return AffineField(self.coefficients[1:], self.coefficients[0])

    def __post_init__(self):
        for arr in (self.coefficients, self.gram, self.futaki_rhs):
            arr.setflags(write=False)


def _affine_basis(dim: int):
    fields = [AffineField(np.zeros(dim), 1.0)]
    for a in range(dim):
        e = np.zeros(dim)
        e[a] = 1.0
        fields.append(AffineField(e, 0.0))
    return fields


def extremal_field(P: MomentPolytope, u: SymplecticPotential | None = None,
                   refine: bool = True) -> ExtremalField:
    """Solve Gram c = Futaki on the affine basis {1, x_1, ..., x_n}.

    The solution's potential is automatically mean-free (the constant row
    forces it) and equals the L2(dx) projection of S_bar - S onto affines.
    """
    from .potentials import guillemin_potential

    if u is None:
        u = guillemin_potential(P)
    grid = u.grid
    basis = _affine_basis(P.dimension)
    m = len(basis)

    def gram_on(g):
        vals = [b(g.nodes) for b in basis]
        G = np.empty((m, m))
        for i in range(m):
            for j in range(i, m):
                G[i, j] = G[j, i] = float(np.sum(g.weights * vals[i] * vals[j]))
        return G

    G = gram_on(grid)
    if refine:
        G = (4.0 * gram_on(P.interior_grid(grid.h / 2)) - G) / 3.0
    rhs = np.array([futaki_invariant(b, u, refine=refine) for b in basis])
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularGram(f"moment matrix condition number {cond:.3g}")
    c = np.linalg.solve(G, rhs)
    f_val = float(c @ rhs)   # (X_c, X_c) = c^T G c = c^T rhs
    return ExtremalField(P, c, f_val, G, rhs)


def hwang_bound(u: SymplecticPotential, xc: ExtremalField | None = None,
                refine: bool = True) -> dict:
    """Calabi-energy lower bound via projection onto the affine kernel.

    Decomposes S_bar - S = rho + rho_perp in L2(dx) with rho affine and
    returns every link of the chain Ca = |rho|^2 + |rho_perp|^2 >= |rho|^2
    >= (rho, S_bar - S)^2 / |rho|^2 >= F_{X_c}.
    """
    if xc is None:
        xc = extremal_field(u.polytope, refine=refine)
    g = u.grid
    cf = scalar_curvature(u)
    r = cf.S_bar - cf.S
    basis = _affine_basis(u.dimension)
    B = np.stack([b(g.nodes) for b in basis], axis=1)
    G = B.T @ (g.weights[:, None] * B)
    coef = np.linalg.solve(G, B.T @ (g.weights * r))
    rho = B @ coef
    rho_sq = float(np.sum(g.weights * rho ** 2))
    perp_sq = float(np.sum(g.weights * (r - rho) ** 2))
    ca_grid = float(np.sum(g.weights * r ** 2))
    ca = calabi_energy(u, refine=refine)
    pairing = float(np.sum(g.weights * rho * r))
    cs_bound = pairing ** 2 / rho_sq if rho_sq > 0 else 0.0
    return {
        "calabi": ca,
        "calabi_grid": ca_grid,
        "rho_sq": rho_sq,
        "perp_sq": perp_sq,
        "pythagoras_defect": ca_grid - rho_sq - perp_sq,
        "cauchy_schwarz_bound": cs_bound,
        "futaki_extremal": xc.futaki_value,
        "margin": ca - xc.futaki_value,
        "projection_coefficients": coef,
    }
