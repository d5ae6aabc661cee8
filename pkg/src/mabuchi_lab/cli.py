"""Command-line front end.

Subcommands: functionals, geodesic, ray, solve-hcma, futaki, battery,
monitors.  Configuration comes from an INI-style file plus flag overrides
(flags win); every config error is collected before reporting, and the exit
code distinguishes config errors (2) from computation errors (1).
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError, MabuchiLabError
from .functionals import calabi_energy, s_bar, scalar_curvature
from .potentials import AffineField, guillemin_potential
from .polytope import make_polytope

_SUBCOMMANDS = ("functionals", "geodesic", "ray", "solve-hcma", "futaki",
                "battery", "monitors")

_DEFAULTS = {
    "polytope": "P1",
    "h": None,
    "s_max": None,
    "eps": 1e-2,
    "eps_schedule": None,
    "newton_tol": 1e-10,
    "max_newton": 60,
    "T": 1.0,
    "t_max": 8.0,
    "experiment": "thm12",
    "n": 50,
    "seed": 0,
    "T_list": "2,4,8",
    "potential": "guillemin",
    "direction": "x",
    "out": None,
    "workers": os.cpu_count() or 1,
    "grid_nt": 64,
    "grid_nx": 64,
}


class RunConfig:
    """Validated run configuration; collects every error before failing."""

    def __init__(self, values: dict):
        self.values = dict(values)
        self.errors = []
        self.polytope = None
        self._validate()
        if self.errors:
            raise ConfigError(self.errors)

    def _validate(self):
        v = self.values
        try:
            spec = v["polytope"]
            if isinstance(spec, str) and ";" in spec:
                spec = _parse_facets(spec)
            self.polytope = make_polytope(spec)
        except MabuchiLabError as e:
            self.errors.append(f"polytope: {e}")
        except Exception as e:
            self.errors.append(f"polytope: unparseable ({e})")
        for key, cast, cond, msg in [
            ("h", float, lambda x: x is None or 0 < x < 1, "must be in (0, 1)"),
            ("eps", float, lambda x: x > 0, "must be > 0"),
            ("T", float, lambda x: x > 0, "must be > 0"),
            ("t_max", float, lambda x: x > 0, "must be > 0"),
            ("n", int, lambda x: x >= 1, "must be >= 1"),
            ("seed", int, lambda x: True, ""),
            ("newton_tol", float, lambda x: x > 0, "must be > 0"),
            ("max_newton", int, lambda x: x >= 1, "must be >= 1"),
            ("grid_nt", int, lambda x: x >= 8, "must be >= 8"),
            ("grid_nx", int, lambda x: x >= 8, "must be >= 8"),
            ("workers", int, lambda x: x >= 0, "must be >= 0"),
        ]:
            raw = v.get(key)
            if raw is None:
                continue
            try:
                val = cast(raw)
                if not cond(val):
                    self.errors.append(f"{key}: {msg} (got {raw})")
                else:
                    v[key] = val
            except (TypeError, ValueError):
                self.errors.append(f"{key}: not a valid {cast.__name__} (got {raw!r})")
        if v.get("experiment") not in ("thm12", "lemma43", "calabi_bound", "monitors"):
            self.errors.append(
                f"experiment: unknown {v.get('experiment')!r} "
                "(choose thm12, lemma43, calabi_bound, monitors)")
        try:
            v["T_list"] = [float(Fraction(s)) for s in str(v["T_list"]).split(",")]
            if any(b <= a for a, b in zip(v["T_list"], v["T_list"][1:])):
                self.errors.append("T_list: must be increasing")
        except (ValueError, ZeroDivisionError):
            self.errors.append(f"T_list: unparseable ({v.get('T_list')!r})")
        if v.get("eps_schedule"):
            try:
                sched = [float(s) for s in str(v["eps_schedule"]).split(",")]
                if any(e <= 0 for e in sched):
                    self.errors.append("eps_schedule: entries must be > 0")
                v["eps_schedule"] = sched
            except ValueError:
                self.errors.append(f"eps_schedule: unparseable ({v['eps_schedule']!r})")

    def outdir(self) -> Path:
        out = self.values.get("out") or os.environ.get("MABUCHI_LAB_OUT") or "mabuchi-out"
        return Path(out)

    def hash(self) -> str:
        from .reporting import config_hash
        return config_hash({k: v for k, v in self.values.items() if k != "out"})


def _parse_facets(text: str):
    """'1 0 0; 0 1 0; -1 -1 -2' -> [((1,0),0), ((0,1),0), ((-1,-1),-2)]."""
    facets = []
    for part in text.split(";"):
        nums = [Fraction(tok) for tok in part.split()]
        if len(nums) < 2:
            raise ValueError(f"facet needs normal components and offset: {part!r}")
        facets.append((tuple(int(c) for c in nums[:-1]), float(nums[-1])))
    return facets


def _load_config_file(path) -> dict:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError([f"config: cannot read {path}"])
    out = {}
    for section in cp.sections():
        for key, val in cp.items(section):
            out[key.replace("-", "_")] = val
    return out


def _collect_values(args) -> dict:
    values = dict(_DEFAULTS)
    if args.config:
        values.update(_load_config_file(args.config))
    for key in _DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _build_potential(cfg: RunConfig):
    P = cfg.polytope
    h = cfg.values.get("h")
    base = guillemin_potential(P, h)
    if cfg.values["potential"] == "guillemin":
        return base
    spec = cfg.values["potential"]
    try:
        coefs = [float(c) for c in str(spec).split(",")]
    except ValueError:
        raise ConfigError([f"potential: unknown spec {spec!r}"])
    from .experiments import RandomMetrics
    sampler = RandomMetrics(base, 0)
    return sampler.potential_from(np.asarray(coefs[:len(sampler.basis)]))


def _direction_field(cfg: RunConfig) -> AffineField:
    d = str(cfg.values["direction"]).strip()
    P = cfg.polytope
    if d == "x":
        a = np.zeros(P.dimension)
        a[0] = 1.0
        return AffineField(a, 0.0)
    if d == "y" and P.dimension == 2:
        return AffineField(np.array([0.0, 1.0]), 0.0)
    try:
        nums = [float(c) for c in d.split(",")]
        return AffineField(np.asarray(nums[:P.dimension]),
                           nums[P.dimension] if len(nums) > P.dimension else 0.0)
    except ValueError:
        raise ConfigError([f"direction: unparseable {d!r}"])


def _cmd_functionals(cfg: RunConfig) -> tuple[int, str]:
    u = _build_potential(cfg)
    ca = calabi_energy(u)
    sb = s_bar(cfg.polytope)
    out = cfg.outdir()
    out.mkdir(parents=True, exist_ok=True)
    cf = scalar_curvature(u)
    payload = {"polytope": cfg.polytope.name, "calabi": ca, "s_bar": sb,
               "s_min": float(cf.S.min()), "s_max": float(cf.S.max()),
               "admissible_min_eig": u.min_eig,
               "config_hash": cfg.hash()}
    (out / "functionals.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
    return 0, f"Ca = {ca:.6g}, S_bar = {sb:.6g}"


def _cmd_geodesic(cfg: RunConfig) -> tuple[int, str]:
    from .geodesics import exact_geodesic, geodesic_residual
    from .experiments import RandomMetrics
    base = guillemin_potential(cfg.polytope, cfg.values.get("h"))
    sampler = RandomMetrics(base, cfg.values["seed"])
    u0, u1 = sampler.draw(), sampler.draw()
    seg = exact_geodesic(u0, u1, n_samples=9)
    res = geodesic_residual(seg) if cfg.polytope.dimension == 1 else float("nan")
    out = cfg.outdir()
    out.mkdir(parents=True, exist_ok=True)
    payload = {"length": seg.length, "speed_spread":
               float(seg.speeds.max() - seg.speeds.min()), "residual": res,
               "config_hash": cfg.hash()}
    (out / "geodesic.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
    return 0, f"length = {seg.length:.6g}, residual = {res:.3g}"


def _cmd_ray(cfg: RunConfig) -> tuple[int, str]:
    from .geodesics import ray_from_affine, yen_invariant, effectiveness_profile
    from .reporting import write_ray_trace
    u0 = _build_potential(cfg)
    f = _direction_field(cfg)
    ray = ray_from_affine(u0, f, t_max=cfg.values["t_max"])
    trace, limit = yen_invariant(ray)
    prof = effectiveness_profile(ray) if cfg.values["t_max"] >= 8 else {"verdict": "n/a"}
    out = cfg.outdir()
    out.mkdir(parents=True, exist_ok=True)
    write_ray_trace(ray, out / "ray_trace.csv", yen_trace=trace, chash=cfg.hash())
    return 0, f"yen = {limit:.6g}, profile = {prof['verdict']}"


def _cmd_solve_hcma(cfg: RunConfig) -> tuple[int, str]:
    from .hcma import solve_hcma_sequence
    from .reporting import dump_strip_solution
    from .experiments import RandomMetrics
    base = guillemin_potential(cfg.polytope, cfg.values.get("h"))
    sampler = RandomMetrics(base, cfg.values["seed"])
    u1 = sampler.draw()
    schedule = cfg.values.get("eps_schedule") or [cfg.values["eps"]]
    sols = solve_hcma_sequence(
        base, u1, cfg.values["T"], schedule,
        grid_shape=(cfg.values["grid_nt"], cfg.values["grid_nx"]),
        S_max=cfg.values.get("s_max"),
        newton_tol=cfg.values["newton_tol"], max_newton=cfg.values["max_newton"])
    out = cfg.outdir()
    for s in sols:
        dump_strip_solution(s, out / f"strip_eps{s.eps:.0e}", chash=cfg.hash())
    last = sols[-1]
    return 0, (f"eps = {last.eps:g}, newton residual = {last.newton_residual:.3g}, "
               f"monitor excess = {last.monitor_report()['excess']:.3%}")


def _cmd_futaki(cfg: RunConfig) -> tuple[int, str]:
    from .futaki import extremal_field, futaki_invariant, futaki_boundary_oracle
    u = _build_potential(cfg)
    f = _direction_field(cfg)
    val = futaki_invariant(f, u)
    oracle = futaki_boundary_oracle(f, cfg.polytope)
    xc = extremal_field(cfg.polytope)
    out = cfg.outdir()
    out.mkdir(parents=True, exist_ok=True)
    payload = {"futaki": val, "boundary_oracle": oracle,
               "oracle_gap": val - oracle,
               "extremal_coefficients": xc.coefficients.tolist(),
               "extremal_futaki": xc.futaki_value,
               "config_hash": cfg.hash()}
    (out / "futaki.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
    return 0, f"F = {val:.8g} (oracle gap {val - oracle:+.2e}), F_Xc = {xc.futaki_value:.6g}"


def _cmd_battery(cfg: RunConfig) -> tuple[int, str]:
    from . import experiments
    from .reporting import write_report
    name = cfg.values["experiment"]
    run = {"thm12": experiments.run_thm12,
           "lemma43": experiments.run_lemma43,
           "calabi_bound": experiments.run_calabi_bound,
           "monitors": experiments.run_estimate_monitors}[name]
    kwargs = {"seed": cfg.values["seed"], "h": cfg.values.get("h")}
    if name in ("thm12", "lemma43"):
        kwargs["n_pairs"] = cfg.values["n"]
    elif name == "calabi_bound":
        kwargs["n_metrics"] = cfg.values["n"]
    else:
        kwargs["n_samples"] = cfg.values["n"]
        kwargs["T_list"] = cfg.values["T_list"]
    if name in ("thm12", "calabi_bound") and cfg.values.get("workers"):
        kwargs["workers"] = cfg.values["workers"]
    rep = run(cfg.polytope, **kwargs)
    paths = write_report(rep, cfg.outdir(), config=dict(
        experiment=name, polytope=cfg.polytope.name, n=cfg.values["n"],
        seed=cfg.values["seed"], h=cfg.values.get("h")))
    key = min(rep.verdicts.values(), key=lambda v: v["margin"] + v["tolerance"]) \
        if rep.verdicts else {"margin": float("nan")}
    ok = rep.all_pass()
    return (0 if ok else 1,
            f"{name}: {'all pass' if ok else 'FAIL'}, "
            f"worst margin = {key['margin']:.3g} -> {paths['report']}")


def _cmd_monitors(cfg: RunConfig) -> tuple[int, str]:
    cfg.values["experiment"] = "monitors"
    return _cmd_battery(cfg)


def _make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mabuchi-lab",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None)
        sp.add_argument("--polytope", default=None)
        sp.add_argument("--h", type=float, default=None)
        sp.add_argument("--s-max", dest="s_max", type=float, default=None)
        sp.add_argument("--eps", type=float, default=None)
        sp.add_argument("--eps-schedule", dest="eps_schedule", default=None)
        sp.add_argument("--newton-tol", dest="newton_tol", type=float, default=None)
        sp.add_argument("--max-newton", dest="max_newton", type=int, default=None)
        sp.add_argument("--T", type=float, default=None)
        sp.add_argument("--t-max", dest="t_max", type=float, default=None)
        sp.add_argument("--experiment", default=None)
        sp.add_argument("--n", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--T-list", dest="T_list", default=None)
        sp.add_argument("--potential", default=None)
        sp.add_argument("--direction", default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--grid-nt", dest="grid_nt", type=int, default=None)
        sp.add_argument("--grid-nx", dest="grid_nx", type=int, default=None)
    return ap


def run_command(argv) -> int:
    ap = _make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        values = _collect_values(args)
        if args.command == "solve-hcma" and float(values.get("eps") or 0) <= 0:
            raise ConfigError(["eps: must be > 0"])
        cfg = RunConfig(values)
    except ConfigError as e:
        for msg in e.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    handler = {
        "functionals": _cmd_functionals,
        "geodesic": _cmd_geodesic,
        "ray": _cmd_ray,
        "solve-hcma": _cmd_solve_hcma,
        "futaki": _cmd_futaki,
        "battery": _cmd_battery,
        "monitors": _cmd_monitors,
    }[args.command]
    try:
        code, summary = handler(cfg)
    except ConfigError as e:
        for msg in e.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    except MabuchiLabError as e:
        print(f"computation error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    print(summary)
    return code


def main() -> None:
    raise SystemExit(run_command(sys.argv[1:]))
