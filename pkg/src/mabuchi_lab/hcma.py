"""Regularized homogeneous Monge-Ampere solver on the strip.

With circle symmetry in the strip angle and torus symmetry on the model,
the (n+1)-dimensional complex equation reduces to a real Monge-Ampere
problem det D2 Psi = eps * G(xi) for the total convex potential Psi(t, xi)
on [0, T] x [-S, S], with Dirichlet data given by the Legendre duals of the
boundary potentials and lateral data from their shared affine asymptotics
(linear interpolation in t, exponentially accurate in S).  The continuity
method walks eps along a geometric ladder with a damped Newton solve per
rung; line search enforces discrete convexity of every iterate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._fd import fd_weights
from .errors import NewtonDivergence, NonConvexIterate, PolytopeMismatch
from .potentials import SymplecticPotential, legendre_values

__all__ = ["StripSolution", "solve_hcma_regularized", "solve_hcma_sequence"]

_LADDER_STEP = 0.5 * np.log(10.0)


@dataclass(frozen=True)
class StripSolution:
    """Converged solution of det D2 Psi = eps G with full diagnostics."""

    boundary0: SymplecticPotential
    boundary1: SymplecticPotential
    T: float
    eps: float
    t: np.ndarray
    xi: np.ndarray
    Psi: np.ndarray             # (nt, nx) total potential
    ambient: np.ndarray         # (nt, nx) ambient total potential
    density: np.ndarray         # G(xi)
    newton_iterations: int
    newton_residual: float      # max |det D2 Psi - eps G| on interior nodes
    stages: tuple               # ((eps, iterations, residual), ...)
    lam: float = 1.0

    def __post_init__(self):
        for a in (self.t, self.xi, self.Psi, self.ambient, self.density):
            a.setflags(write=False)

    @property
    def psi_tilde(self) -> np.ndarray:
        """Relative potential: solution minus ambient."""
        return self.Psi - self.ambient

    def boundary_defect(self) -> float:
        """Sup distance of the first/last rows from the prescribed data."""
        psi0 = legendre_values(self.boundary0, self.xi[:, None])
        psi1 = legendre_values(self.boundary1, self.xi[:, None])
        return float(max(np.abs(self.Psi[0] - psi0).max(),
                         np.abs(self.Psi[-1] - psi1).max()))

    def monitor_trace(self, core_only: bool = True) -> np.ndarray:
        """Per-time max of exp(-lam psi~)(n + 1 + Delta~ psi~).

        Delta~ is the Laplacian of the ambient metric.  Centered stencils
        need one neighbour on each side, so the trace lives on the interior
        time slices t_1 .. t_{nt-2}; its first and last entries are the
        discrete stand-ins for the t-boundary slices.  With ``core_only``
        the max runs over the columns whose moment image lies in the grid
        core of the boundary potentials; the far lateral tail is truncation
        scaffolding, not manifold.
        """
        dt = self.t[1] - self.t[0]
        dx = self.xi[1] - self.xi[0]
        A, R = self.ambient, self.psi_tilde
        att = (A[2:] - 2 * A[1:-1] + A[:-2]) / dt ** 2
        rtt = (R[2:] - 2 * R[1:-1] + R[:-2]) / dt ** 2
        axx = _d2_cols(A[1:-1], dx)
        rxx = _d2_cols(R[1:-1], dx)
        atx = ((A[2:, 2:] - A[2:, :-2] - A[:-2, 2:] + A[:-2, :-2])
               / (4 * dt * dx))
        rtx = ((R[2:, 2:] - R[2:, :-2] - R[:-2, 2:] + R[:-2, :-2])
               / (4 * dt * dx))
        det = att[:, 1:-1] * axx[:, 1:-1] - atx ** 2
        lap = (axx[:, 1:-1] * rtt[:, 1:-1] - 2 * atx * rtx
               + att[:, 1:-1] * rxx[:, 1:-1]) / det
        n_plus_1 = 2.0
        M = np.exp(-self.lam * R[1:-1, 1:-1]) * (n_plus_1 + lap)
        if core_only:
            cut = min(self.boundary0.default_s_max(0.0),
                      self.boundary1.default_s_max(0.0))
            cols = np.abs(self.xi[1:-1]) <= cut
            if not cols.any():
                cols[:] = True
            return M[:, cols].max(axis=1)
        return M[:, 2:-2].max(axis=1)

    def monitor_report(self) -> dict:
        tr = self.monitor_trace()
        boundary = float(max(tr[0], tr[-1]))
        interior = float(tr[1:-1].max())
        return {
            "trace": tr,
            "boundary_max": boundary,
            "interior_max": interior,
            "excess": interior / boundary - 1.0,
        }

    def sup_error_vs(self, exact_dual) -> float:
        """Sup distance from a reference (t, xi) field of the same shape."""
        return float(np.abs(self.Psi - np.asarray(exact_dual)).max())

    def value_range(self) -> float:
        return float(self.Psi.max() - self.Psi.min())


def _d2_rows(F, h):
    out = np.empty_like(F)
    out[1:-1] = (F[2:] - 2 * F[1:-1] + F[:-2]) / h ** 2
    w = fd_weights(0.0, np.arange(4, dtype=float), 2)[:, 2] / h ** 2
    out[0] = np.tensordot(w, F[:4], axes=(0, 0))
    out[-1] = np.tensordot(w[::-1], F[-4:], axes=(0, 0))
    return out


def _d2_cols(F, h):
    return _d2_rows(F.T, h).T


class _StripProblem:
    def __init__(self, psi0, psi1, G, T, S, nt, nx):
        self.t = np.linspace(0.0, T, nt)
        self.xi = np.linspace(-S, S, nx)
        self.dt = self.t[1] - self.t[0]
        self.dx = self.xi[1] - self.xi[0]
        self.nt, self.nx = nt, nx
        self.T = T
        TT = self.t[:, None] * np.ones(nx)[None, :]
        self.TT = TT
        self.L = (1 - TT / T) * psi0[None, :] + (TT / T) * psi1[None, :]
        self.G = G
        self.logG = np.log(G)
        self.interior = np.zeros((nt, nx), dtype=bool)
        self.interior[1:-1, 1:-1] = True
        self.idx = np.arange(nt * nx).reshape(nt, nx)
        self.ii = self.idx[self.interior]
        self.Iint, self.Jint = np.where(self.interior)
        cmap = -np.ones(nt * nx, dtype=int)
        cmap[self.ii] = np.arange(self.ii.size)
        self.cmap = cmap

    def hessian_interior(self, P):
        dt, dx = self.dt, self.dx
        Ptt = (P[2:, 1:-1] - 2 * P[1:-1, 1:-1] + P[:-2, 1:-1]) / dt ** 2
        Pxx = (P[1:-1, 2:] - 2 * P[1:-1, 1:-1] + P[1:-1, :-2]) / dx ** 2
        Ptx = (P[2:, 2:] - P[2:, :-2] - P[:-2, 2:] + P[:-2, :-2]) / (4 * dt * dx)
        return Ptt, Pxx, Ptx

    def det_interior(self, P):
        Ptt, Pxx, Ptx = self.hessian_interior(P)
        if (Ptt <= 0).any():
            return None
        d = Ptt * Pxx - Ptx ** 2
        if (d <= 0).any():
            return None
        return d

    def _window_candidates(self):
        """Lateral windows for the t(T-t) convexifier, in order of preference.

        The density shape works when the lateral data is nearly linear in t;
        a data-aware shape dominates the mixed derivative of rougher data.
        """
        yield self.G / self.G.max()
        Ltx = np.abs(np.gradient((self.L[-1] - self.L[0]) / self.T,
                                 self.xi[1] - self.xi[0]))
        pxx_floor = np.maximum(self.G, 1e-12)
        win = self.G / self.G.max() + Ltx ** 2 / pxx_floor
        yield win / win.max()
        yield np.cos(np.pi * self.xi / (2 * self.xi[-1])) ** 2

    def initial_iterate(self):
        for win in self._window_candidates():
            c = 1e-4
            while c < 1e9:
                P = self.L - c * self.TT * (self.T - self.TT) * win[None, :]
                if self.det_interior(P) is not None:
                    return P, c
                c *= 2
        raise NonConvexIterate("no convex initial iterate found")

    def newton(self, P, eps, tol, maxit, max_backtracks=50):
        target = np.log(eps) + self.logG[None, 1:-1]
        it = 0
        raw = np.inf
        for it in range(maxit):
            d = self.det_interior(P)
            if d is None:
                raise NonConvexIterate("iterate lost convexity")
            R = np.log(d) - target
            raw = float(np.abs(d - eps * self.G[None, 1:-1]).max())
            if raw < tol:
                return P, it, raw, True
            Ptt, Pxx, Ptx = self.hessian_interior(P)
            ctt = (Pxx / d).ravel() / self.dt ** 2
            cxx = (Ptt / d).ravel() / self.dx ** 2
            ctx = (-2 * Ptx / d).ravel() / (4 * self.dt * self.dx)
            k = np.arange(self.ii.size)
            rows, cols, vals = [], [], []

            def add(di, dj, co):
                rows.append(k)
                cols.append(self.idx[self.Iint + di, self.Jint + dj])
                vals.append(co)

            add(1, 0, ctt); add(-1, 0, ctt); add(0, 0, -2 * ctt - 2 * cxx)
            add(0, 1, cxx); add(0, -1, cxx)
            add(1, 1, ctx); add(-1, -1, ctx); add(1, -1, -ctx); add(-1, 1, -ctx)
            rows = np.concatenate(rows)
            cols = np.concatenate(cols)
            vals = np.concatenate(vals)
            keep = self.cmap[cols] >= 0
            A = sp.csr_matrix((vals[keep], (rows[keep], self.cmap[cols[keep]])),
                              shape=(self.ii.size, self.ii.size))
            delta = spla.spsolve(A, -R.ravel())
            nrm = np.linalg.norm(R)
            alpha = 1.0
            stepped = False
            for _ in range(max_backtracks):
                Pn = P.copy()
                Pn[self.interior] += alpha * delta
                dn = self.det_interior(Pn)
                if dn is not None:
                    R2 = np.log(dn) - target
                    if np.linalg.norm(R2) <= (1 - 0.25 * alpha) * nrm:
                        P = Pn
                        stepped = True
                        break
                alpha /= 2
            if not stepped:
                raise NewtonDivergence(
                    f"line search failed {max_backtracks} times at eps={eps:g}")
        return P, it, raw, raw < tol


def _prepare(boundary0, boundary1, T, S_max, grid_shape):
    if boundary0.polytope.dimension != 1:
        raise PolytopeMismatch(
            "the strip solver covers 1-dimensional polytopes (2-D strips); "
            "higher-dimensional strips are outside the implemented scope")
    if boundary0.polytope.signature() != boundary1.polytope.signature():
        raise PolytopeMismatch("boundary potentials live on different polytopes")
    if T <= 0:
        raise ValueError("T must be > 0")
    nt, nx = grid_shape
    if S_max is None:
        S_max = max(boundary0.default_s_max(), boundary1.default_s_max(), 4.0)
    xi = np.linspace(-S_max, S_max, nx)
    psi0 = legendre_values(boundary0, xi[:, None])
    psi1 = legendre_values(boundary1, xi[:, None])
    # base density G = det D2 psi_{u0} = 1 / u0''(x*(xi))
    from .potentials import _legendre_1d
    _, xs = _legendre_1d(boundary0, xi)
    H, _, _ = boundary0.hessian_tensors(points=xs[:, None], max_order=0) \
        if boundary0.v_poly is not None else (None, None, None)
    if H is None:
        # fall back to FD of psi0 on the xi axis
        dxx = np.gradient(np.gradient(psi0, xi), xi)
        G = np.maximum(dxx, 1e-12)
    else:
        G = 1.0 / H[:, 0, 0]
    return _StripProblem(psi0, psi1, G, T, S_max, nt, nx)


def solve_hcma_regularized(boundary0: SymplecticPotential,
                           boundary1: SymplecticPotential,
                           T: float, eps: float,
                           grid_shape=(64, 64), S_max: float | None = None,
                           newton_tol: float = 1e-10,
                           max_newton: int = 60) -> StripSolution:
    """Solve det D2 Psi = eps G on the strip with Dirichlet data.

    eps must be strictly positive; the degenerate problem is reached only
    as the limit of the eps-sequence API.
    """
    sols = solve_hcma_sequence(boundary0, boundary1, T, [eps], grid_shape,
                               S_max, newton_tol, max_newton)
    return sols[0]


def _mix_boundary(b0, b1, s: float):
    vk = (1 - s) * b0.v + s * b1.v
    vp = None
    if b0.v_poly is not None and b1.v_poly is not None:
        vp = (1 - float(s)) * b0.v_poly + float(s) * b1.v_poly
    return b0.with_smooth_part(vk, vp)


def _bootstrap(prob, newton_tol, max_newton):
    P, _ = prob.initial_iterate()
    d = prob.det_interior(P)
    cur = float(np.exp(np.median(np.log(d) - prob.logG[None, 1:-1])))
    P, _, _, ok = prob.newton(P, cur, newton_tol, max_newton)
    if not ok:
        raise NewtonDivergence("bootstrap stage did not converge")
    return P, cur


def _walk_eps(prob, P, cur, target, newton_tol, max_newton):
    while abs(np.log(cur / target)) > 1e-9:
        step = float(np.clip(np.log(target / cur), -_LADDER_STEP, _LADDER_STEP))
        nxt = cur * np.exp(step)
        try:
            P2, _, _, ok = prob.newton(P, nxt, newton_tol, max_newton)
        except (NonConvexIterate, NewtonDivergence):
            ok = False
        if not ok:
            nxt = float(np.sqrt(cur * nxt))
            P2, _, _, ok = prob.newton(P, nxt, newton_tol, max_newton)
            if not ok:
                raise NewtonDivergence(f"ladder stalled near eps={nxt:g}")
        P, cur = P2, nxt
    return P, cur


def _data_continuation(boundary0, boundary1, T, S_max, grid_shape,
                       newton_tol, max_newton, eps_safe=0.1):
    """Walk the far boundary from boundary0 towards boundary1.

    Stages run at a comfortably large regularization level (fat convexity
    margins); each stage shifts the previous converged iterate by the
    change in the linear background, which updates all Dirichlet rows
    consistently, then re-converges Newton.  The step is bisected whenever
    convexity or Newton fails.
    """
    s_reached = 0.0
    step = 0.5
    prob = None
    P = cur = None
    while True:
        s_try = min(s_reached + step, 1.0)
        prob_try = _prepare(boundary0, _mix_boundary(boundary0, boundary1, s_try),
                            T, S_max, grid_shape)
        try:
            if P is None:
                P_try, cur_try = _bootstrap(prob_try, newton_tol, max_newton)
                P_try, cur_try = _walk_eps(prob_try, P_try, cur_try,
                                           max(cur_try, eps_safe),
                                           newton_tol, max_newton)
            else:
                shifted = P + (prob_try.L - prob.L)
                if prob_try.det_interior(shifted) is None:
                    raise NonConvexIterate("data step broke convexity")
                P_try, _, _, ok = prob_try.newton(shifted, cur, newton_tol,
                                                  max_newton)
                if not ok:
                    raise NewtonDivergence("data stage did not converge")
                cur_try = cur
        except (NonConvexIterate, NewtonDivergence):
            step /= 2
            if step < 1e-3:
                raise NewtonDivergence(
                    "boundary-data continuation stalled; data too far from "
                    "the background for this grid")
            continue
        P, cur, prob = P_try, cur_try, prob_try
        s_reached = s_try
        if s_reached >= 1.0:
            return P, cur, prob
        step = min(2 * step, 1.0 - s_reached)


def solve_hcma_sequence(boundary0, boundary1, T, eps_list, grid_shape=(64, 64),
                        S_max=None, newton_tol=1e-10, max_newton=60):
    """Warm-started continuation through the decreasing eps_list."""
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list):
        raise ValueError("eps must be > 0")
    prob = _prepare(boundary0, boundary1, T, S_max, grid_shape)
    try:
        P, cur = _bootstrap(prob, newton_tol, max_newton)
    except (NonConvexIterate, NewtonDivergence):
        P, cur, prob = _data_continuation(boundary0, boundary1, T, S_max,
                                          grid_shape, newton_tol, max_newton)
    # the bootstrap solution is a genuine strip Kahler potential matching the
    # Dirichlet data; it serves as the ambient for the relative-potential gauge
    ambient = P.copy()
    out = []
    stages = []
    for eT in eps_list:
        while abs(np.log(cur / eT)) > 1e-9:
            step = float(np.clip(np.log(eT / cur), -_LADDER_STEP, _LADDER_STEP))
            nxt = cur * np.exp(step)
            try:
                P2, it, raw, ok = prob.newton(P, nxt, newton_tol, max_newton)
            except (NonConvexIterate, NewtonDivergence):
                ok = False
            if not ok:
                # halve the continuation step (geometric mean)
                nxt = float(np.sqrt(cur * nxt))
                P2, it, raw, ok = prob.newton(P, nxt, newton_tol, max_newton)
                if not ok:
                    raise NewtonDivergence(
                        f"continuation stalled near eps={nxt:g} (residual {raw:g})")
            P = P2
            cur = nxt
            stages.append((cur, it, raw))
        out.append(StripSolution(
            boundary0, boundary1, float(T), eT, prob.t, prob.xi, P.copy(),
            ambient, prob.G,
            newton_iterations=stages[-1][1] if stages else 0,
            newton_residual=stages[-1][2] if stages else 0.0,
            stages=tuple(stages),
        ))
    return out
