"""Inequality batteries with structured, reproducible reports.

Each battery draws reproducible random admissible metrics, evaluates one of
the paper-level inequalities sample by sample, and reports every margin
(never a bare boolean).  Every battery re-runs at half the grid spacing so
the refinement cannot silently flip a verdict.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .functionals import (PotentialPath, calabi_energy, distance_lower_bound,
                          energy_slope, geodesic_distance, k_energy_delta)
from .futaki import extremal_field, hwang_bound
from .geodesics import ray_from_affine
from .polytope import MomentPolytope, make_polytope
from .potentials import (AffineField, PolynomialMap, SymplecticPotential,
                         guillemin_potential, make_potential)

__all__ = [
    "ExperimentReport", "RandomMetrics",
    "run_thm12", "run_lemma43", "run_calabi_bound", "run_estimate_monitors",
]


@dataclass
class ExperimentReport:
    """Structured record of one battery run."""

    experiment: str
    polytope: str
    seed: int
    grid: dict
    samples: list = field(default_factory=list)   # one dict per sample
    summary: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)  # name -> {pass, margin, tolerance}
    acceptance_rate: float = 1.0
    wall_clock: float = 0.0

    def verdict(self, name: str, margin: float, tolerance: float):
        self.verdicts[name] = {
            "pass": bool(margin >= -tolerance),
            "margin": float(margin),
            "tolerance": float(tolerance),
        }

    def all_pass(self) -> bool:
        return all(v["pass"] for v in self.verdicts.values())


def _bump_basis(P: MomentPolytope):
    """Low-order polynomial basis vanishing on the boundary of P."""
    if P.dimension == 1:
        a, b = float(P.vertices.min()), float(P.vertices.max())
        # (x - a)(b - x) * {1, x, x^2, x^3}
        base = np.polynomial.polynomial.polymul([-a, 1.0], [b, -1.0])
        out = []
        for k in range(4):
            mono = np.zeros(k + 1)
            mono[k] = 1.0
            out.append(PolynomialMap(np.polynomial.polynomial.polymul(base, mono), 1))
        return out
    # product of all facet affine functions * {1, x, y, x^2, xy, y^2}
    bump = np.array([[1.0]])
    for nu, lam in zip(P.normals, P.offsets):
        fac = np.zeros((2, 2))
        fac[0, 0] = -lam
        fac[1, 0] = nu[0]
        fac[0, 1] = nu[1]
        bump = _conv2(bump, fac)
    monos = []
    for (i, j) in ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)):
        m = np.zeros((i + 1, j + 1))
        m[i, j] = 1.0
        monos.append(m)
    return [PolynomialMap(_conv2(bump, m), 2) for m in monos]


def _conv2(A, B):
    out = np.zeros((A.shape[0] + B.shape[0] - 1, A.shape[1] + B.shape[1] - 1))
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            if A[i, j]:
                out[i:i + B.shape[0], j:j + B.shape[1]] += A[i, j] * B
    return out


class RandomMetrics:
    """Rejection sampler for admissible potentials around the reference.

    Coefficient boxes are calibrated per polytope so at least half of the
    draws are accepted; the acceptance rate is part of every report.
    Besides positive-definiteness, draws must clear a uniform-ellipticity
    floor: near-degenerate Hessians put the curvature fields outside what
    the desk-scale quadrature can resolve, so they count as rejections.
    """

    _SCALES = {"P1": 0.8, "P2": 0.35, "PF1": 0.3}

    def __init__(self, base: SymplecticPotential, seed: int,
                 scale: float | None = None, min_ellipticity: float = 0.25):
        self.base = base
        self.basis = _bump_basis(base.polytope)
        self.rng = np.random.default_rng(seed)
        self.scale = scale if scale is not None else self._SCALES.get(base.polytope.name, 0.3)
        self.min_ellipticity = min_ellipticity
        self.draws = 0
        self.accepted = 0

    def coefficients(self):
        return self.rng.uniform(-self.scale, self.scale, len(self.basis))

    def potential_from(self, coefs) -> SymplecticPotential:
        p = PolynomialMap(np.zeros(1 if self.base.dimension == 1 else (1, 1)),
                          self.base.dimension)
        for c, bk in zip(coefs, self.basis):
            p = p + float(c) * bk
        return make_potential(self.base, p)

    def draw(self) -> SymplecticPotential:
        from .errors import NotAdmissible

        while True:
            self.draws += 1
            try:
                pot = self.potential_from(self.coefficients())
            except NotAdmissible:
                continue
            if pot.min_eig < self.min_ellipticity:
                continue
            self.accepted += 1
            return pot

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.draws if self.draws else 1.0


def _resolve(P, h):
    if isinstance(P, str):
        P = make_polytope(P)
    if h is None:
        h = 1 / 64 if P.dimension == 1 else 1 / 48
    return P, h


def _parallel_map(fn, items, workers: int):
    """Order-preserving map; samples are pure functions of their inputs."""
    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def run_thm12(P, n_pairs: int = 50, seed: int = 0, h: float | None = None,
              refine_check: bool = True, workers: int = 0) -> ExperimentReport:
    """Energy-distance inequality: d(u0,u1) sqrt(Ca(u1)) >= E(u1) - E(u0).

    Both orientations are tested for every random pair.
    """
    P, h = _resolve(P, h)
    t0 = time.time()
    rep = ExperimentReport("thm12", P.name, seed, {"h": h})

    def battery(hh):
        base = guillemin_potential(P, hh)
        sampler = RandomMetrics(base, seed)
        pairs = [(k, sampler.draw(), sampler.draw()) for k in range(n_pairs)]

        def evaluate(item):
            k, u0, u1 = item
            d = geodesic_distance(u0, u1)
            dE = k_energy_delta(PotentialPath.linear(u0, u1))
            ca0 = calabi_energy(u0)
            ca1 = calabi_energy(u1)
            return {"pair": k, "distance": d, "delta_E": dE,
                    "ca0": ca0, "ca1": ca1,
                    "margin_forward": d * np.sqrt(max(ca1, 0.0)) - dE,
                    "margin_reverse": d * np.sqrt(max(ca0, 0.0)) + dE}

        rows = _parallel_map(evaluate, pairs, workers)
        return rows, sampler.acceptance_rate

    rows, rate = battery(h)
    rep.samples = rows
    rep.acceptance_rate = rate
    worst = min(min(r["margin_forward"], r["margin_reverse"]) for r in rows)
    rep.summary = {"worst_margin": worst, "n_pairs": n_pairs}
    rep.verdict("thm12_margin", worst, 1e-4)
    if refine_check:
        rows2, _ = battery(h / 2)
        worst2 = min(min(r["margin_forward"], r["margin_reverse"]) for r in rows2)
        rep.summary["worst_margin_refined"] = worst2
        rep.verdict("thm12_margin_refined", worst2, 1e-4)
        # refinement may only worsen the margin by 1e-4
        rep.verdict("refinement_drift", worst2 - worst, 1e-4)
    rep.wall_clock = time.time() - t0
    return rep


def run_lemma43(P, n_pairs: int = 50, seed: int = 0, h: float | None = None,
                n_trace: int = 11, refine_check: bool = True) -> ExperimentReport:
    """Monotonicity of the energy slope along exact geodesics."""
    P, h = _resolve(P, h)
    t0 = time.time()
    rep = ExperimentReport("lemma43", P.name, seed, {"h": h, "n_trace": n_trace})

    def battery(hh):
        base = guillemin_potential(P, hh)
        sampler = RandomMetrics(base, seed)
        worst_step = np.inf
        worst_end = np.inf
        rows = []
        for k in range(n_pairs):
            u0 = sampler.draw()
            u1 = sampler.draw()
            f = u1.v - u0.v
            ts = np.linspace(0.0, 1.0, n_trace)
            trace = []
            for tv in ts:
                vt = (1 - tv) * u0.v + tv * u1.v
                vp = None
                if u0.v_poly is not None and u1.v_poly is not None:
                    vp = (1 - float(tv)) * u0.v_poly + float(tv) * u1.v_poly
                ut = u0.with_smooth_part(vt, vp)
                trace.append(energy_slope(ut, f, refine=False))
            trace = np.asarray(trace)
            step_min = float(np.diff(trace).min())
            end_gap = float(trace[-1] - trace[0])
            worst_step = min(worst_step, step_min)
            worst_end = min(worst_end, end_gap)
            rows.append({"pair": k, "min_step": step_min, "endpoint_gap": end_gap,
                         "slope_start": float(trace[0]), "slope_end": float(trace[-1])})
        return rows, worst_step, worst_end, sampler.acceptance_rate

    rows, worst_step, worst_end, rate = battery(h)
    rep.samples = rows
    rep.acceptance_rate = rate
    rep.summary = {"worst_step": worst_step, "worst_endpoint_gap": worst_end}
    rep.verdict("trace_monotone", worst_step, 1e-6)
    rep.verdict("endpoint_inequality", worst_end, 1e-5)
    if refine_check:
        _, ws2, we2, _ = battery(h / 2)
        rep.summary["worst_step_refined"] = ws2
        rep.verdict("trace_monotone_refined", ws2, 1e-6)
    rep.wall_clock = time.time() - t0
    return rep


def run_calabi_bound(P, n_metrics: int = 100, seed: int = 0, h: float | None = None,
                     ray_times=(2.0, 4.0, 8.0), optimize: bool = True,
                     optimizer_budget: int = 900,
                     refine_check: bool = True, workers: int = 0) -> ExperimentReport:
    """Hwang bound battery plus the finite-ray chain and a near-extremal probe."""
    P, h = _resolve(P, h)
    t0 = time.time()
    rep = ExperimentReport("calabi_bound", P.name, seed,
                           {"h": h, "ray_times": list(ray_times)})
    base = guillemin_potential(P, h)
    xc = extremal_field(P, base)
    sampler = RandomMetrics(base, seed)
    worst = np.inf
    worst_chain = np.inf
    worst_ray = np.inf
    ray = None
    if P.dimension == 2 and abs(xc.futaki_value) > 1e-10:
        # destabilizing orientation: pushing along +rho is generated by the
        # field with potential -rho, whose energy slope is -F_{X_c} < 0
        rho = xc.potential()
        ray = ray_from_affine(base, AffineField(rho.a, rho.b),
                              t_max=max(ray_times), n_samples=9)
    draws = [(k, sampler.draw()) for k in range(n_metrics)]

    def evaluate(item):
        k, u = item
        hb = hwang_bound(u, xc)
        row = {"metric": k, "calabi": hb["calabi"], "rho_sq": hb["rho_sq"],
               "perp_sq": hb["perp_sq"], "margin": hb["margin"],
               "pythagoras_defect": hb["pythagoras_defect"],
               "chain_pythagoras": hb["calabi_grid"] - hb["rho_sq"],
               "chain_cauchy_schwarz": hb["rho_sq"] - hb["cauchy_schwarz_bound"]}
        if ray is not None:
            from .functionals import curvature_moment
            for T in ray_times:
                end = ray.potential_at(T)
                g = u.grid
                f = end.v - u.v
                nrm = float(np.sqrt(np.sum(g.weights * f ** 2)))
                if nrm == 0.0 or end.v_poly is None or u.v_poly is None:
                    continue
                # direction as a polynomial so both slopes refine cleanly
                fp = end.v_poly + (-1.0) * u.v_poly
                lhs = -curvature_moment(u, fp, refine=True) / nrm
                rhs = -curvature_moment(end, fp, refine=True) / nrm
                row[f"ray_gap_T{T:g}"] = rhs - lhs
        return row

    rep.samples = _parallel_map(evaluate, draws, workers)
    for row in rep.samples:
        worst = min(worst, row["margin"])
        worst_chain = min(worst_chain, row["chain_pythagoras"],
                          row["chain_cauchy_schwarz"])
        for key, val in row.items():
            if key.startswith("ray_gap"):
                worst_ray = min(worst_ray, val)
    rep.acceptance_rate = sampler.acceptance_rate
    rep.summary = {"futaki_extremal": xc.futaki_value, "worst_margin": worst,
                   "worst_chain_link": worst_chain}
    rep.verdict("hwang_margin", worst, 1e-5)
    rep.verdict("proof_chain", worst_chain, 1e-8)
    if ray is not None:
        rep.summary["worst_ray_gap"] = worst_ray
        rep.verdict("finite_ray_inequality", worst_ray, 1e-5)
        # the squared-slope bound Ca >= yen^2 needs an *effective*
        # destabilizer; affine rays keep Ca constant, so the effectiveness
        # hypothesis fails and the bound is only exercised via the finite-ray
        # chain above.  Record which hypothesis failed instead of a vacuous
        # pass.
        from .geodesics import effectiveness_profile, yen_invariant
        trace, yen = yen_invariant(ray)
        prof = effectiveness_profile(ray)
        rep.summary["destabilizer_yen"] = yen
        rep.summary["destabilizer_profile"] = prof["verdict"]
        rep.summary["destabilizer_effective"] = bool(
            yen < 0 and prof["verdict"] == "vanishing")
    if optimize and P.dimension == 2:
        gap = _near_extremal_gap(P, base, xc, optimizer_budget)
        rep.summary["near_extremal_relative_gap"] = gap
        rep.verdict("near_extremal", 0.05 - gap, 0.0)
    if refine_check:
        base2 = guillemin_potential(P, h / 2)
        sampler2 = RandomMetrics(base2, seed)
        xc2 = extremal_field(P, base2)
        worst2 = np.inf
        for k in range(n_metrics):
            u = sampler2.draw()
            worst2 = min(worst2, hwang_bound(u, xc2)["margin"])
        rep.summary["worst_margin_refined"] = worst2
        rep.verdict("hwang_margin_refined", worst2, 1e-5)
    rep.wall_clock = time.time() - t0
    return rep


def _near_extremal_gap(P, base, xc, budget: int) -> float:
    """Minimize Ca over a 6-parameter low-order family; report (Ca - F)/F."""
    dim = P.dimension
    monos = ((2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2)) if dim == 2 \
        else ((2,), (3,), (4,))

    def vmap(c):
        p = PolynomialMap(np.zeros((1, 1) if dim == 2 else 1), dim)
        for ck, mo in zip(c, monos):
            m = np.zeros((mo[0] + 1, mo[1] + 1)) if dim == 2 else np.zeros(mo[0] + 1)
            m[mo if dim == 2 else mo[0]] = 1.0
            p = p + float(ck) * PolynomialMap(m, dim)
        return p

    from .errors import NotAdmissible

    def objective(c):
        try:
            u = make_potential(base, vmap(c))
        except NotAdmissible:
            return 1e6
        return calabi_energy(u, refine=False)

    res = minimize(objective, np.zeros(len(monos)), method="Powell",
                   options={"maxfev": budget, "xtol": 1e-6, "ftol": 1e-9})
    ca = calabi_energy(make_potential(base, vmap(res.x)), refine=True)
    return float((ca - xc.futaki_value) / xc.futaki_value)


def run_estimate_monitors(P, n_samples: int = 50, seed: int = 0,
                          h: float | None = None, T_list=(2.0, 4.0, 8.0),
                          with_solver: bool = True,
                          refine_check: bool = True) -> ExperimentReport:
    """Exhaustion uniformity, distance lower bound and the strip monitor."""
    from .geodesics import ray_by_exhaustion
    from .hcma import solve_hcma_sequence

    P, h = _resolve(P, h)
    if P.dimension != 1:
        raise ValueError("estimate monitors run on 1-dimensional models")
    t0 = time.time()
    rep = ExperimentReport("estimate_monitors", P.name, seed,
                           {"h": h, "T_list": list(T_list)})
    base = guillemin_potential(P, h)
    sampler = RandomMetrics(base, seed)

    # Lemma 3.16-style exhaustion: affine ray, perturbed start
    ray = ray_from_affine(base, AffineField(np.ones(1), -0.5),
                          t_max=max(T_list), n_samples=9)
    start = sampler.draw()
    ex = ray_by_exhaustion(start, ray, T_list)
    rep.summary["exhaustion_uniform_defect"] = ex["uniform_defect"]
    rep.summary["parallel_constant"] = ex["parallel_constant"]
    rep.summary["cauchy_gaps"] = ex["cauchy_gaps"]
    rep.verdict("exhaustion_uniform", 1e-5 - ex["uniform_defect"], 0.0)
    gaps = ex["cauchy_gaps"]
    rep.verdict("exhaustion_cauchy",
                min(a - b for a, b in zip(gaps, gaps[1:])) if len(gaps) > 1 else 0.0,
                1e-12)

    # distance lower bound battery
    worst = np.inf
    for k in range(n_samples):
        u = sampler.draw()
        out = distance_lower_bound(u, base)
        worst = min(worst, out["margin"])
        rep.samples.append({"sample": k, **{k2: v for k2, v in out.items()}})
    rep.summary["worst_distance_margin"] = worst
    rep.verdict("distance_lower_bound", worst, 1e-6)
    rep.acceptance_rate = sampler.acceptance_rate

    if with_solver:
        u1 = sampler.draw()
        sols = solve_hcma_sequence(base, u1, 1.0, [1e-2, 1e-3], grid_shape=(48, 48))
        excesses = [s.monitor_report()["excess"] for s in sols]
        rep.summary["monitor_excesses"] = excesses
        rep.verdict("lemma317_monitor", 0.02 - max(excesses), 0.0)

    if refine_check:
        base2 = guillemin_potential(P, h / 2)
        sampler2 = RandomMetrics(base2, seed)
        worst2 = np.inf
        for k in range(n_samples):
            u = sampler2.draw()
            worst2 = min(worst2, distance_lower_bound(u, base2)["margin"])
        rep.summary["worst_distance_margin_refined"] = worst2
        rep.verdict("distance_lower_bound_refined", worst2, 1e-6)
    rep.wall_clock = time.time() - t0
    return rep
