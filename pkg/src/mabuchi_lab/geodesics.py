"""Geodesic segments, rays, stability invariants and ray diagnostics.

In the torus model the geodesic between two metrics is the linear
interpolation of their symplectic potentials; this classical fact is the
package's oracle and is itself validated against the geodesic ODE on the
Kahler side by :func:`geodesic_residual`.  Rays in affine directions are
the model's one-parameter-symmetry degenerations: u(t) = u0 + t f is the
pullback along the flow of the torus field with holomorphy potential -f.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonMonotoneTrace, PolytopeMismatch
from .functionals import PotentialPath, calabi_energy, scalar_curvature
from .futaki import ExtremalField, extremal_field
from .potentials import (AffineField, SymplecticPotential, legendre_values)

__all__ = [
    "GeodesicSegment", "GeodesicRay",
    "exact_geodesic", "geodesic_residual", "kahler_path_residual",
    "ray_from_affine", "yen_invariant", "effectiveness_profile",
    "ray_by_exhaustion", "tamed_diagnostics", "ambient_for_ray",
]


@dataclass(frozen=True)
class GeodesicSegment:
    """Exact geodesic between two potentials, sampled uniformly on [0, 1]."""

    u0: SymplecticPotential
    u1: SymplecticPotential
    path: PotentialPath
    length: float
    speeds: np.ndarray

    def __post_init__(self):
        self.speeds.setflags(write=False)

    def potential_at(self, t: float) -> SymplecticPotential:
        vk = (1 - t) * self.u0.v + t * self.u1.v
        vp = None
        if self.u0.v_poly is not None and self.u1.v_poly is not None:
            vp = (1 - float(t)) * self.u0.v_poly + float(t) * self.u1.v_poly
        return self.u0.with_smooth_part(vk, vp)


def exact_geodesic(u0: SymplecticPotential, u1: SymplecticPotential,
                   n_samples: int = 11) -> GeodesicSegment:
    """Linear interpolation of symplectic potentials, with speed trace."""
    path = PotentialPath.linear(u0, u1, n_nodes=n_samples, rule="uniform")
    g = u0.grid
    f = u1.v - u0.v
    speed = float(np.sqrt(np.sum(g.weights * f ** 2)))
    speeds = np.full(n_samples, speed)
    return GeodesicSegment(u0, u1, path, speed, speeds)


def _dual_on_box(u: SymplecticPotential, xi: np.ndarray) -> np.ndarray:
    """xi comes shaped (M, dim) from the callers."""
    return legendre_values(u, xi)


def geodesic_residual(seg: GeodesicSegment, n_xi: int = 41,
                      s_max: float | None = None) -> float:
    """Sup of |phi'' - |grad phi'|^2_phi| on the Kahler side.

    phi(t, xi) is reconstructed from the duals of the time samples; the
    Hessian of the full potential and both time derivatives come from
    finite differences in (t, xi), so nothing of the linear-interpolation
    ansatz is assumed.  Evaluated where the moment image is in the grid
    core (the residual is 0/0 in the far tails).
    """
    if s_max is None:
        s_max = min(seg.u0.default_s_max(0.0), seg.u1.default_s_max(0.0))
    path = seg.path
    t = path.times
    if len(t) < 3:
        raise PolytopeMismatch("need at least 3 time samples for the residual")
    dim = seg.u0.dimension
    if dim == 1:
        xi = np.linspace(-s_max, s_max, n_xi)[:, None]
    else:
        ax = np.linspace(-s_max, s_max, n_xi)
        A, B = np.meshgrid(ax, ax, indexing="ij")
        xi = np.stack([A.ravel(), B.ravel()], axis=1)
    psi = np.stack([_dual_on_box(p, xi) for p in path.potentials])  # (nt, M)
    return kahler_path_residual(t, xi, psi, dim, n_xi)


def kahler_path_residual(t: np.ndarray, xi: np.ndarray, psi: np.ndarray,
                         dim: int, n_xi: int) -> float:
    """Residual of the geodesic ODE for given Kahler-side samples psi(t, xi)."""
    dt = t[1] - t[0]
    if np.abs(np.diff(t) - dt).max() > 1e-12:
        raise PolytopeMismatch("residual needs uniform time samples")
    phi_tt = (psi[2:] - 2 * psi[1:-1] + psi[:-2]) / dt ** 2
    phi_t = (psi[2:] - psi[:-2]) / (2 * dt)
    if dim == 1:
        h = xi[1, 0] - xi[0, 0]
        grads = np.gradient(phi_t, h, axis=1)[:, :, None]
        hess_psi = np.stack([np.gradient(np.gradient(p, h), h) for p in psi[1:-1]])
        hess = hess_psi[:, :, None, None]
    else:
        h = xi[n_xi, 0] - xi[0, 0]
        nt = len(t) - 2
        M = len(xi)
        phi_t2 = phi_t.reshape(nt, n_xi, n_xi)
        gx = np.gradient(phi_t2, h, axis=1)
        gy = np.gradient(phi_t2, h, axis=2)
        grads = np.stack([gx.reshape(nt, M), gy.reshape(nt, M)], axis=2)
        hess = np.empty((nt, M, 2, 2))
        for k in range(nt):
            p2 = psi[k + 1].reshape(n_xi, n_xi)
            pxx = np.gradient(np.gradient(p2, h, axis=0), h, axis=0)
            pyy = np.gradient(np.gradient(p2, h, axis=1), h, axis=1)
            pxy = np.gradient(np.gradient(p2, h, axis=0), h, axis=1)
            hess[k, :, 0, 0] = pxx.ravel()
            hess[k, :, 1, 1] = pyy.ravel()
            hess[k, :, 0, 1] = hess[k, :, 1, 0] = pxy.ravel()
    sol = np.linalg.solve(hess, grads[..., None])[..., 0]
    kinetic = np.einsum("tmi,tmi->tm", grads, sol)
    res = np.abs(phi_tt - kinetic)
    # trim FD-contaminated edges of the box
    if dim == 1:
        core = res[:, 2:-2]
    else:
        r = res.reshape(res.shape[0], n_xi, n_xi)
        core = r[:, 2:-2, 2:-2]
    return float(core.max())


@dataclass(frozen=True)
class GeodesicRay:
    """One-sided geodesic from u0 in an affine (or general) direction."""

    base: SymplecticPotential
    direction: AffineField | None
    times: np.ndarray
    potentials: tuple
    calabi: np.ndarray
    direction_values: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.times.setflags(write=False)
        self.calabi.setflags(write=False)

    def velocity(self) -> np.ndarray:
        if self.direction_values is not None:
            return self.direction_values
        return self.direction(self.base.grid.nodes)

    def potential_at(self, t: float) -> SymplecticPotential:
        f = self.direction
        if f is None:
            raise PolytopeMismatch("general-direction rays store only samples")
        return self.base.add_affine(AffineField(t * f.a, t * f.b))


def ray_from_affine(u0: SymplecticPotential, f: AffineField,
                    t_max: float = 8.0, n_samples: int = 17) -> GeodesicRay:
    """u(t) = u0 + t f; affine directions keep the Hessian, hence stay
    admissible for every t, and realize the flow of the field with
    holomorphy potential -f."""
    times = np.linspace(0.0, t_max, n_samples)
    pots = tuple(u0.add_affine(AffineField(t * f.a, t * f.b)) for t in times)
    ca = np.array([calabi_energy(p) for p in pots])
    return GeodesicRay(u0, f, times, pots, ca)


def yen_invariant(ray: GeodesicRay, modified: bool = False,
                  xc: ExtremalField | None = None,
                  monotone_slack: float = 1e-6):
    """Energy-slope trace along the ray and its limit estimate.

    The integrand is dE/dt = int (du/dt)(S - S_bar) dx; for the modified
    variant the extremal potential is added to the residual so rays
    generated by the extremal field itself score zero.  The limit is the
    last sample, certified by monotonicity of the trace; a decreasing trace
    raises NonMonotoneTrace (a discretization failure).
    """
    if len(ray.times) < 5:
        raise PolytopeMismatch("need at least 5 ray samples")
    g = ray.base.grid
    refined = ray.direction is not None and ray.base.v_poly is not None
    if modified and xc is None:
        xc = extremal_field(ray.base.polytope)
    trace = []
    if refined:
        # affine direction: both the curvature moment and the extremal-term
        # quadrature refine on the two-grid pair
        from .functionals import curvature_moment
        f = ray.direction
        mod_term = 0.0
        if modified:
            theta_c = xc.potential()
            mod_term = _refined_pair_integral(ray.base, f, theta_c)
        for p in ray.potentials:
            val = -curvature_moment(p, f, refine=True)
            trace.append(val + mod_term)
    else:
        vel = ray.velocity()
        theta_c = xc.potential()(g.nodes) if modified else None
        for p in ray.potentials:
            cf = scalar_curvature(p)
            resid = cf.S - cf.S_bar
            if modified:
                resid = resid + theta_c
            trace.append(float(np.sum(g.weights * vel * resid)))
    trace = np.asarray(trace)
    steps = np.diff(trace)
    if steps.size and steps.min() < -monotone_slack:
        raise NonMonotoneTrace(
            f"energy-slope trace decreases by {-steps.min():.3g} (> {monotone_slack:g})")
    return trace, float(trace[-1])


def _refined_pair_integral(u: SymplecticPotential, f, g) -> float:
    """Two-grid Richardson quadrature of int_P f g dx."""
    def single(grid):
        return float(np.sum(grid.weights * f(grid.nodes) * g(grid.nodes)))

    coarse = single(u.grid)
    fine = single(u.polytope.interior_grid(u.grid.h / 2))
    return (4.0 * fine - coarse) / 3.0


def effectiveness_profile(ray: GeodesicRay, floor: float = 1e-5) -> dict:
    """Trace of t^2 Ca(u(t)) and a {vanishing, bounded, growing} verdict."""
    if ray.times[-1] < 8.0 - 1e-12:
        raise PolytopeMismatch("effectiveness profile needs t_max >= 8")
    t = ray.times
    prof = t ** 2 * ray.calabi
    if prof.max() <= floor:
        return {"trace": prof, "verdict": "vanishing", "slope": 0.0}
    half = t > t[-1] / 2
    half &= (t > 0) & (prof > 0)
    slope = float(np.polyfit(np.log(t[half]), np.log(prof[half]), 1)[0])
    if slope >= 0.5:
        verdict = "growing"
    elif slope <= -0.5:
        verdict = "vanishing"
    else:
        verdict = "bounded"
    return {"trace": prof, "verdict": verdict, "slope": slope}


def ray_by_exhaustion(u0: SymplecticPotential, ray: GeodesicRay,
                      T_list, window: float | None = None,
                      n_window_samples: int = 9) -> dict:
    """Approximate the parallel ray from u0 by segments u0 -> ray(T).

    For each T the exact geodesic from u0 to ray(T) is restricted to the
    time window [0, window]; the sup over the window of |segment - ray| is
    the boundedness monitor whose uniformity in T realizes the exhaustion
    scheme.  The closed-form parallel ray is u0 + t f, giving the constant
    sup |u0 - ray(0)| as the oracle value.
    """
    T_list = list(T_list)
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise PolytopeMismatch("T_list must be increasing")
    if window is None:
        window = T_list[0]
    g = u0.grid
    tgrid = np.linspace(0.0, window, n_window_samples)
    monitors = {}
    window_fields = {}
    for T in T_list:
        target = ray.potential_at(T)
        # segment potential at ray-time t is u0 + (t/T)(target - u0)
        vals = []
        sup = 0.0
        for t in tgrid:
            seg_v = u0.v + (t / T) * (target.v - u0.v)
            ray_v = ray.potential_at(t).v
            diff = seg_v - ray_v
            sup = max(sup, float(np.abs(diff).max()))
            vals.append(seg_v)
        monitors[T] = sup
        window_fields[T] = np.asarray(vals)
    gaps = []
    for Ta, Tb in zip(T_list, T_list[1:]):
        gaps.append(float(np.abs(window_fields[Tb] - window_fields[Ta]).max()))
    oracle = float(np.abs(u0.v - ray.potential_at(0.0).v).max())
    return {
        "monitors": monitors,
        "window": window,
        "cauchy_gaps": gaps,
        "parallel_constant": oracle,
        "uniform_defect": max(abs(m - oracle) for m in monitors.values()),
    }


def ambient_for_ray(ray: GeodesicRay, xi: np.ndarray, times: np.ndarray,
                    convexifier: float = 0.5):
    """Ambient data over (times, xi) built from the ray.

    Returns (gauge, metric_potential): the gauge is the ray's own dual and
    fixes the relative-potential normalization rho - rho_bar; the metric
    potential adds a t^2 strip convexifier so its full (t, xi) Hessian is a
    genuine ambient Kahler metric.  Splitting the two mirrors the block
    construction for one-parameter flows, whose ambient metric has bounded
    geometry while the gauge tracks the ray.
    """
    psi = np.stack([_dual_on_box(ray.potential_at(t), xi) for t in times])
    return psi, psi + convexifier * (times ** 2)[:, None]


def tamed_diagnostics(ray: GeodesicRay, ambient_ray: GeodesicRay | None = None,
                      strip=None, s_max: float | None = None,
                      n_xi: int = 41, n_t: int = 9) -> dict:
    """Bounded-ambient-geometry diagnostics for a ray.

    Reports per-sample sups of |n+1+Delta_h(rho - rho_bar)| and
    |d(rho - rho_bar)/dt| over the log-coordinate box, with the ambient
    built from ``ambient_ray`` (default: the ray itself, so the relative
    potential is the closed-form u0 - ray(0) transport).  When a strip
    solution is attached its maximum-principle monitor is appended.
    """
    base_ray = ambient_ray if ambient_ray is not None else ray
    if s_max is None:
        s_max = ray.base.default_s_max() + 0.5
    dim = ray.base.dimension
    if dim != 1:
        raise PolytopeMismatch("tamed diagnostics are implemented for dimension 1")
    xi = np.linspace(-s_max, s_max, n_xi)[:, None]
    times = np.linspace(ray.times[0], ray.times[-1], n_t)
    rho = np.stack([_dual_on_box(ray.potential_at(t), xi) for t in times])
    gauge, amb = ambient_for_ray(base_ray, xi, times)
    rel = rho - gauge
    dt = times[1] - times[0]
    h = xi[1, 0] - xi[0, 0]
    # ambient metric = full (t, xi) Hessian of the convexified potential
    att = (amb[2:] - 2 * amb[1:-1] + amb[:-2]) / dt ** 2
    axx = np.stack([np.gradient(np.gradient(a, h), h) for a in amb[1:-1]])
    atx = np.gradient((amb[2:] - amb[:-2]) / (2 * dt), h, axis=1)
    rtt = (rel[2:] - 2 * rel[1:-1] + rel[:-2]) / dt ** 2
    rxx = np.stack([np.gradient(np.gradient(r, h), h) for r in rel[1:-1]])
    rtx = np.gradient((rel[2:] - rel[:-2]) / (2 * dt), h, axis=1)
    det = att * axx - atx ** 2
    lap = (axx * rtt - 2 * atx * rtx + att * rxx) / det
    dim_term = dim + 1
    q1 = np.abs(dim_term + lap)
    drdt = np.abs((rel[2:] - rel[:-2]) / (2 * dt))
    out = {
        "times": times[1:-1],
        "laplacian_bound": float(q1[:, 2:-2].max()),
        "dt_bound": float(drdt[:, 2:-2].max()),
        "relative_sup": float(np.abs(rel).max()),
    }
    if strip is not None:
        out["strip_monitor"] = strip.monitor_report()
    return out
