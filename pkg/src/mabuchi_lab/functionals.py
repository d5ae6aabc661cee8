"""Scalar-curvature functionals and path energies.

The dictionary between manifold and polytope quantities: every invariant
integral \\int_M (.) w_phi^n becomes \\int_P (.) dx (action-angle
coordinates), the scalar curvature is the double divergence of the inverse
Hessian of the symplectic potential, S = -sum_ij d_i d_j u^{ij}, and the
tangent vector (manifold-side velocity) of a path t -> u(t) pulls back to
-du/dt.  The class average S_bar = 2 Vol_sigma(dP) / Vol(P) is the one
normalization constant; it makes the affine integration-by-parts oracle of
the Futaki invariant exact and gives S = 4 for the round segment metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PolytopeMismatch
from .polytope import MomentPolytope
from .potentials import AffineField, SymplecticPotential, legendre_values

__all__ = [
    "CurvatureField", "PotentialPath",
    "scalar_curvature", "calabi_energy", "curvature_mass_defect",
    "i_functional", "j_functional", "k_energy_delta", "entropy",
    "path_length", "geodesic_distance",
    "s_bar", "energy_slope", "curvature_moment", "distance_lower_bound",
]


def s_bar(P: MomentPolytope) -> float:
    """Average scalar curvature of the class: 2 Vol_sigma(dP) / Vol(P)."""
    return 2.0 * P.lattice_perimeter() / P.volume()


@dataclass(frozen=True)
class CurvatureField:
    """Scalar curvature S at the grid nodes plus the class average."""

    potential: SymplecticPotential
    S: np.ndarray
    S_bar: float

    def __post_init__(self):
        self.S.setflags(write=False)

    @property
    def residual(self) -> np.ndarray:
        return self.S - self.S_bar

    def mass_defect(self) -> float:
        """Quadrature of (S - S_bar); zero in exact arithmetic."""
        g = self.potential.grid
        return float(np.sum(g.weights * self.residual))


def scalar_curvature(u: SymplecticPotential) -> CurvatureField:
    """S = -sum_ab d_a d_b W_ab with W the inverse Hessian of u.

    Assembled from the analytic reference chain: with H the Hessian field,
    d_a d_b W = W dH_a W dH_b W + W dH_b W dH_a W - W ddH_ab W, so only
    derivatives of the smooth part are ever taken numerically.
    """
    H, dH, ddH = u.hessian_tensors(max_order=2)
    W = np.linalg.inv(H)
    n = u.dimension
    S = np.zeros(len(W))
    for a in range(n):
        WdHa = W @ dH[:, a] @ W
        for b in range(n):
            term = (WdHa @ dH[:, b] @ W
                    + W @ dH[:, b] @ WdHa
                    - W @ ddH[:, a, b] @ W)
            S -= term[:, a, b]
    return CurvatureField(u, S, s_bar(u.polytope))


def curvature_mass_defect(u: SymplecticPotential, refine: bool = True) -> float:
    """Quadrature of (S - S_bar) over P; vanishes in exact arithmetic."""
    val = scalar_curvature(u).mass_defect()
    if refine and _resamplable(u):
        val2 = scalar_curvature(u.resample(u.grid.h / 2)).mass_defect()
        val = (4.0 * val2 - val) / 3.0
    return float(val)


def calabi_energy(u: SymplecticPotential, refine: bool = True) -> float:
    """Ca = int_P (S - S_bar)^2 dx >= 0; zero exactly at csc metrics."""
    val = _ca_single(u)
    if refine and _resamplable(u):
        val2 = _ca_single(u.resample(u.grid.h / 2))
        val = (4.0 * val2 - val) / 3.0
    return float(max(val, 0.0))


def _ca_single(u: SymplecticPotential) -> float:
    cf = scalar_curvature(u)
    g = u.grid
    return float(np.sum(g.weights * cf.residual ** 2))


def _resamplable(u: SymplecticPotential) -> bool:
    return u.v_poly is not None or u.dimension == 1


def curvature_moment(u: SymplecticPotential, f, refine: bool = True) -> float:
    """int_P f (S_bar - S) dx with optional two-grid Richardson refinement.

    ``f`` is a callable on points (AffineField qualifies).  This is the
    common kernel of the Futaki invariant and the K-energy differential.
    """
    def single(pot: SymplecticPotential) -> float:
        cf = scalar_curvature(pot)
        g = pot.grid
        return float(np.sum(g.weights * f(g.nodes) * (cf.S_bar - cf.S)))

    val = single(u)
    if refine and _resamplable(u):
        val2 = single(u.resample(u.grid.h / 2))
        val = (4.0 * val2 - val) / 3.0
    return val


# -- paths -------------------------------------------------------------------


@dataclass(frozen=True)
class PotentialPath:
    """Time-sampled family of potentials with velocities du/dt.

    ``weights`` are quadrature weights on the time samples when the path was
    built on a quadrature rule; paths assembled from raw samples fall back
    to composite trapezoid weights.
    """

    times: np.ndarray
    potentials: tuple
    velocities: tuple        # grid arrays du/dt at each sample
    weights: np.ndarray | None = None

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise PolytopeMismatch("path times must be strictly increasing")

    @property
    def grid(self):
        return self.potentials[0].grid

    def quadrature_weights(self) -> np.ndarray:
        if self.weights is not None:
            return self.weights
        t = self.times
        w = np.zeros_like(t)
        w[1:] += np.diff(t) / 2
        w[:-1] += np.diff(t) / 2
        return w

    @staticmethod
    def linear(u0: SymplecticPotential, u1: SymplecticPotential,
               n_nodes: int = 11, rule: str = "gauss") -> "PotentialPath":
        """The exact-geodesic path u(t) = (1-t) u0 + t u1 on [0, 1]."""
        _same_polytope(u0, u1)
        if rule == "gauss":
            x, w = np.polynomial.legendre.leggauss(n_nodes)
            t = (x + 1) / 2
            w = w / 2
        else:
            t = np.linspace(0, 1, n_nodes)
            w = None
        f = u1.v - u0.v
        fp = None
        if u0.v_poly is not None and u1.v_poly is not None:
            fp = u1.v_poly + (-1.0) * u0.v_poly
        pots, vels = [], []
        for tk in t:
            vk = (1 - tk) * u0.v + tk * u1.v
            vpk = None
            if fp is not None:
                vpk = u0.v_poly + float(tk) * fp
            pots.append(u0.with_smooth_part(vk, vpk))
            vels.append(f)
        return PotentialPath(np.asarray(t), tuple(pots), tuple(vels),
                             None if w is None else np.asarray(w))

    @staticmethod
    def from_map(u_of_t, du_of_t, times) -> "PotentialPath":
        """Sample an analytic family (callables t -> potential / velocity array)."""
        times = np.asarray(times, dtype=float)
        pots = tuple(u_of_t(t) for t in times)
        vels = tuple(np.asarray(du_of_t(t), dtype=float) for t in times)
        return PotentialPath(times, pots, vels)


def _same_polytope(u0: SymplecticPotential, u1: SymplecticPotential):
    if u0.grid is not u1.grid and u0.polytope.signature() != u1.polytope.signature():
        raise PolytopeMismatch("potentials live on different polytopes")
    if u0.grid.n_nodes != u1.grid.n_nodes:
        raise PolytopeMismatch("potentials live on different grids")


# -- functionals of one or two potentials -------------------------------------


def i_functional(path: PotentialPath):
    """I along the path and its endpoint (closed-form) increment.

    In this model I(u) = int_P (u_ref - u) dx up to the gauge I(reference
    metric) = 0, so dI/dt = -int_P du/dt dx; dI/dt is constant along exact
    geodesics.  Returns (values, d_values, endpoint_delta).
    """
    g = path.grid
    vals = np.array([-float(np.sum(g.weights * p.v)) for p in path.potentials])
    dvals = np.array([-float(np.sum(g.weights * v)) for v in path.velocities])
    endpoint = -float(np.sum(g.weights * (path.potentials[-1].v - path.potentials[0].v)))
    return vals, dvals, endpoint


def j_functional(u: SymplecticPotential, base: SymplecticPotential) -> float:
    """J = int_M phi (w_base^n - w_u^n) >= 0, phi the relative potential.

    Pulled to the polytope, phi at the base moment image is psi_u - psi_base
    evaluated at grad u_base(x); at the u image the roles swap.  Both come
    from one Legendre transform each.
    """
    _same_polytope(u, base)
    g = u.grid
    su = base.gradient()          # base moment slopes at nodes
    sb = u.gradient()             # u moment slopes at nodes
    # phi(grad u_base(x)) = psi_u(s) - (s.x - u_base(x)) with s = grad u_base
    phi_base_img = legendre_values(u, su) - (np.sum(su * g.nodes, axis=1) - base.u_values())
    # phi(grad u(x)) = (s.x - u(x)) - psi_base(s) with s = grad u
    phi_u_img = (np.sum(sb * g.nodes, axis=1) - u.u_values()) - legendre_values(base, sb)
    return float(np.sum(g.weights * (phi_base_img - phi_u_img)))


def k_energy_delta(path: PotentialPath, refine: bool = False) -> float:
    """E(end) - E(start) = int_t int_P (du/dt) (S - S_bar) dx dt.

    Sign pinned by the velocity dictionary (manifold velocity = -du/dt):
    pushing along +f lowers E exactly when the Futaki pairing of f is
    positive; see the consistency test against the Futaki invariant.
    With ``refine`` each time sample is evaluated on the two-grid pair
    (needs resamplable potentials and a matching velocity interpolant).
    """
    w = path.quadrature_weights()
    vel_poly = _linear_velocity_poly(path)
    total = 0.0
    for wk, pot, vel in zip(w, path.potentials, path.velocities):
        cf = scalar_curvature(pot)
        val = float(np.sum(path.grid.weights * vel * (cf.S - cf.S_bar)))
        if refine and vel_poly is not None and pot.v_poly is not None:
            fine = pot.resample(pot.grid.h / 2)
            cf2 = scalar_curvature(fine)
            vf = vel_poly(fine.grid.nodes)
            val2 = float(np.sum(fine.grid.weights * vf * (cf2.S - cf2.S_bar)))
            val = (4.0 * val2 - val) / 3.0
        total += wk * val
    return total


def _linear_velocity_poly(path: PotentialPath):
    """Polynomial velocity of a linear path, or None if not linear."""
    pots = path.potentials
    if pots[0].v_poly is None or pots[-1].v_poly is None:
        return None
    span = float(path.times[-1] - path.times[0])
    if span <= 0:
        return None
    cand = (1.0 / span) * (pots[-1].v_poly + (-1.0) * pots[0].v_poly)
    if np.abs(cand(path.grid.nodes) - path.velocities[0]).max() > 1e-10:
        return None
    return cand


def energy_slope(u: SymplecticPotential, direction: np.ndarray,
                 refine: bool = True) -> float:
    """dE/dt at u along du/dt = direction (grid array or AffineField)."""
    if isinstance(direction, AffineField):
        return -curvature_moment(u, direction, refine=refine)
    cf = scalar_curvature(u)
    return float(np.sum(u.grid.weights * np.asarray(direction) * (cf.S - cf.S_bar)))


def entropy(u: SymplecticPotential, base: SymplecticPotential) -> float:
    """Volume-ratio entropy int_P log(det D2 base / det D2 u) dx.

    The densities are compared at a fixed moment point, which is the
    reduction in which affine shifts leave the ratio untouched
    (D2(affine) = 0).  Reported with its sign.
    """
    _same_polytope(u, base)
    Hu, _, _ = u.hessian_tensors(max_order=0)
    Hb, _, _ = base.hessian_tensors(max_order=0)
    ratio = np.linalg.slogdet(Hb)[1] - np.linalg.slogdet(Hu)[1]
    return float(np.sum(u.grid.weights * ratio))


def path_length(path: PotentialPath):
    """L2 length of the path: int sqrt(int_P (du/dt)^2 dx) dt, plus speeds."""
    g = path.grid
    speeds = np.array([float(np.sqrt(np.sum(g.weights * v ** 2)))
                       for v in path.velocities])
    w = path.quadrature_weights()
    return float(np.sum(w * speeds)), speeds


def geodesic_distance(u0: SymplecticPotential, u1: SymplecticPotential) -> float:
    """Length of the exact geodesic: the L2 norm of u1 - u0 on the polytope."""
    _same_polytope(u0, u1)
    g = u0.grid
    d = u1.v - u0.v
    return float(np.sqrt(np.sum(g.weights * d ** 2)))


def distance_lower_bound(u: SymplecticPotential, base: SymplecticPotential) -> dict:
    """Check max(int phi_- w^n, int phi_+ w_phi^n) <= d(base, u).

    The relative potential is first normalized to I = 0 by an additive
    constant, as the distance bound requires.
    """
    _same_polytope(u, base)
    g = u.grid
    vol = g.weights.sum()
    shift = float(np.sum(g.weights * (u.v - base.v)) / vol)
    un = u.add_affine(AffineField(np.zeros(u.dimension), -shift))
    su = base.gradient()
    sb = un.gradient()
    phi_base_img = legendre_values(un, su) - (np.sum(su * g.nodes, axis=1) - base.u_values())
    phi_u_img = (np.sum(sb * g.nodes, axis=1) - un.u_values()) - legendre_values(base, sb)
    neg_part = float(np.sum(g.weights * np.maximum(-phi_base_img, 0.0)))
    pos_part = float(np.sum(g.weights * np.maximum(phi_u_img, 0.0)))
    d = geodesic_distance(base, un)
    return {
        "lhs": max(neg_part, pos_part),
        "distance": d,
        "margin": d - max(neg_part, pos_part),
        "neg_part": neg_part,
        "pos_part": pos_part,
    }
