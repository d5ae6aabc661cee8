"""Serialization: reports, potential dumps, strip dumps, plot data.

CSV bodies are deterministic functions of the inputs (shortest round-trip
float formatting, fixed column order); timestamps only ever appear in JSON
metadata, so identical configs diff clean on the CSV side.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from pathlib import Path

import numpy as np

from .experiments import ExperimentReport
from .potentials import SymplecticPotential

__all__ = [
    "config_hash", "write_report", "dump_potential", "load_potential_dump",
    "dump_strip_solution", "write_ray_trace",
]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def write_report(report: ExperimentReport, outdir, config: dict | None = None) -> dict:
    """Write report.json, samples.csv and plotdata/ files; returns paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    chash = config_hash(config or {"experiment": report.experiment,
                                   "polytope": report.polytope,
                                   "seed": report.seed, **report.grid})
    meta = {
        "experiment": report.experiment,
        "polytope": report.polytope,
        "seed": report.seed,
        "grid": _jsonable(report.grid),
        "summary": _jsonable(report.summary),
        "verdicts": _jsonable(report.verdicts),
        "acceptance_rate": report.acceptance_rate,
        "wall_clock_seconds": report.wall_clock,
        "config_hash": chash,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    json_path = outdir / "report.json"
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True))

    csv_path = outdir / "samples.csv"
    if report.samples:
        cols = sorted({k for row in report.samples for k in row})
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"# config_hash={chash}"])
            w.writerow(cols)
            for row in report.samples:
                w.writerow([_fmt(row.get(c, "")) for c in cols])

    plotdir = outdir / "plotdata"
    plotdir.mkdir(exist_ok=True)
    margin_cols = [c for c in (report.samples[0] if report.samples else {})
                   if "margin" in c or "gap" in c]
    for col in margin_cols:
        vals = sorted(float(r[col]) for r in report.samples if col in r)
        with open(plotdir / f"{col}_sorted.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"# config_hash={chash}"])
            w.writerow(["rank", col])
            for i, v in enumerate(vals):
                w.writerow([i, _fmt(v)])
    return {"report": str(json_path), "samples": str(csv_path),
            "plotdata": str(plotdir), "config_hash": chash}


def dump_potential(u: SymplecticPotential, path) -> None:
    """Flat CSV grid dump with a header line (polytope, h, S_max)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"# polytope={u.polytope.name}", f"h={_fmt(u.grid.h)}",
                    f"S_max={_fmt(u.default_s_max())}", f"reference={u.reference}"])
        w.writerow([*(f"x{i}" for i in range(u.dimension)), "v"])
        for node, val in zip(u.grid.nodes, u.v):
            w.writerow([*(_fmt(c) for c in node), _fmt(val)])


def load_potential_dump(path, check: bool = True):
    """Read a potential dump back into (polytope_name, h, nodes, values)."""
    path = Path(path)
    with open(path) as fh:
        r = csv.reader(fh)
        header = next(r)
        meta = dict(item.lstrip("# ").split("=", 1) for item in header)
        next(r)
        rows = [[float(c) for c in row] for row in r]
    arr = np.asarray(rows)
    return meta, arr[:, :-1], arr[:, -1]


def dump_strip_solution(sol, prefix, chash: str | None = None) -> dict:
    """Binary grid plus JSON sidecar with diagnostics.

    Suffixes are appended verbatim: prefixes routinely contain dots from
    the eps value, which Path.with_suffix would eat.
    """
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    npz = Path(str(prefix) + ".npz")
    np.savez_compressed(npz, t=sol.t, xi=sol.xi, Psi=sol.Psi,
                        ambient=sol.ambient, density=sol.density)
    mr = sol.monitor_report()
    sidecar = {
        "T": sol.T,
        "eps": sol.eps,
        "grid_shape": list(sol.Psi.shape),
        "newton_iterations": sol.newton_iterations,
        "newton_residual": sol.newton_residual,
        "stages": [[float(e), int(i), float(r)] for e, i, r in sol.stages],
        "monitor_boundary_max": mr["boundary_max"],
        "monitor_interior_max": mr["interior_max"],
        "monitor_excess": mr["excess"],
        "boundary_defect": sol.boundary_defect(),
        "config_hash": chash,
    }
    js = Path(str(prefix) + ".json")
    js.write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return {"grid": str(npz), "sidecar": str(js)}


def write_ray_trace(ray, path, yen_trace=None, monitors: dict | None = None,
                    chash: str | None = None) -> None:
    """CSV trace: t, Ca, yen integrand, t^2 Ca, plus any monitor columns."""
    path = Path(path)
    t = ray.times
    t2ca = t ** 2 * ray.calabi
    cols = {"t": t, "Ca": ray.calabi}
    if yen_trace is not None:
        cols["yen_integrand"] = yen_trace
    cols["t2Ca"] = t2ca
    for name, vals in (monitors or {}).items():
        cols[name] = vals
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if chash:
            w.writerow([f"# config_hash={chash}"])
        w.writerow(cols.keys())
        for i in range(len(t)):
            w.writerow([_fmt(c[i]) if i < len(c) else "" for c in cols.values()])
