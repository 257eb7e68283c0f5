"""Fine-versus-limit convergence study and its report files."""
from __future__ import annotations

import csv
import json
import logging
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import SMALLEST_DEFAULT_EPS, ConfigError, RunConfig
from .fem2d import assemble, build_mesh, energy, solve, trace_jump
from .fem2d.mesh import Mesh2D, MeshResolution
from .fem2d.post import TraceData, trace_l2
from .limit import (assemble_limit, interface_model, limit_mesh_for, limit_traces, solve_limit)
from .scaling import LayerScaling

log = logging.getLogger(__name__)

COLUMNS = ("epsilon", "jump_u1_err", "jump_u2", "stress12_err", "stress22_err",
           "fine_energy", "limit_energy", "energy_gap", "dofs_fine", "dofs_limit")
NORM_COLUMNS = COLUMNS[1:5]


class ReportError(ValueError):
    pass


@dataclass
class ConvergenceRow:
    epsilon: float
    jump_u1_err: float
    jump_u2: float
    stress12_err: float
    stress22_err: float
    fine_energy: float
    limit_energy: float
    energy_gap: float
    dofs_fine: int
    dofs_limit: int
    wall_time: float = 0.0

    def values(self) -> tuple:
        return tuple(getattr(self, c) for c in COLUMNS)


@dataclass
class ConvergenceReport:
    spring: str
    rows: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    def sort(self) -> "ConvergenceReport":
        self.rows.sort(key=lambda r: -r.epsilon)
        return self

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], float)

    def decreasing(self, name: str) -> bool:
        v = self.column(name)
        return bool(v.size >= 2 and np.all(np.diff(v) < 0))


@dataclass
class ConvergenceStudy:
    reports: dict
    refinement: dict
    timings: dict
    config: RunConfig


# ---------------------------------------------------------------------------
# Single solves
# ---------------------------------------------------------------------------

@dataclass
class FineRun:
    s: LayerScaling
    mesh: Mesh2D
    u: object
    trace: TraceData
    energy: float
    system: object


def run_fine(cfg: RunConfig, s: LayerScaling, res: MeshResolution, fill_layer: bool = False) -> FineRun:
    mesh = build_mesh(s, res, cfg.domain, fill_layer=fill_layer)
    if mesh.n_dofs > cfg.study.max_dofs:
        raise ConfigError(f"fine mesh has {mesh.n_dofs} dofs, above max_dofs={cfg.study.max_dofs}")
    sys_ = assemble(mesh, cfg.mat_bulk, cfg.mat_beam, cfg.load_spec, s)
    u = solve(sys_, cfg.tol, cfg.method)
    mats = {0: cfg.mat_bulk, 1: cfg.mat_beam}
    return FineRun(s, mesh, u, trace_jump(u, mats), energy(sys_, u)[1], sys_)


def run_limit(cfg: RunConfig, s: LayerScaling, spring: str, xs, res: MeshResolution,
              k_scale: float = 1.0):
    im = interface_model(s, cfg.mat_beam.young, cfg.load_spec, spring,
                         res.width_factor, k_scale)
    lm = limit_mesh_for(xs, s, res, cfg.domain, bonded=im.k is None)
    sys_ = assemble_limit(lm, cfg.mat_bulk, im, cfg.load_spec.f_bulk)
    return solve_limit(sys_, lm, cfg.tol, cfg.method), im


def _cell_edges(s: LayerScaling, mesh: Mesh2D) -> np.ndarray:
    c = mesh.beam_centres
    return np.concatenate([c - s.epsilon / 2, [c[-1] + s.epsilon / 2]])


def _trace_average(xq, wq, values, edges):
    idx = np.searchsorted(edges, xq) - 1
    out = np.zeros(edges.size - 1)
    ok = (idx >= 0) & (idx < out.size)
    np.add.at(out, idx[ok], wq[ok] * values[ok])
    return out / np.diff(edges)


def compare(fine: FineRun, limit, cfg: RunConfig) -> dict:
    """The four interface norms on ``omega_hat`` and the energy gap."""
    s = fine.s
    edges = _cell_edges(s, fine.mesh)
    x = fine.trace.x
    sel = (x >= edges[0] - 1e-14) & (x <= edges[-1] + 1e-14)
    xh = x[sel]
    lim_jump = np.interp(xh, limit.x, limit.jump[:, 0])
    d1 = fine.trace.jump[sel, 0] - lim_jump
    jump_u1_err = trace_l2(xh, d1)
    jump_u2 = trace_l2(xh, fine.trace.jump[sel, 1])

    xq, wq, sig_plus, _ = limit_traces(limit, cfg.mat_bulk)
    tr = fine.trace
    errs = {}
    for name, comp in (("stress12_err", 2), ("stress22_err", 1)):
        fa = tr.cell_average(edges, comp)
        la = _trace_average(xq, wq, sig_plus[:, comp], edges)
        errs[name] = float(np.sqrt(np.sum(np.diff(edges) * (fa - la) ** 2)))
    El = limit.energy()
    return {"jump_u1_err": jump_u1_err, "jump_u2": jump_u2, **errs,
            "fine_energy": fine.energy, "limit_energy": El,
            "energy_gap": abs(fine.energy - El) / abs(El)}


def _study_eps(cfg: RunConfig, eps_list) -> list:
    eps_list = sorted({float(e) for e in eps_list}, reverse=True)
    small = [e for e in eps_list if e < SMALLEST_DEFAULT_EPS - 1e-15]
    if small and not cfg.study.allow_small_eps:
        raise ConfigError(f"eps below {SMALLEST_DEFAULT_EPS} ({small}) needs study.allow_small_eps = true")
    if small:
        log.warning("eps %s: large resolved-beam meshes, expect a long run", small)
    return eps_list


def _one_eps(cfg, eps, springs, res):
    t0 = time.perf_counter()
    s = cfg.scaling(eps)
    fine = run_fine(cfg, s, res)
    t_fine = time.perf_counter() - t0
    rows = {}
    for spring in springs:
        t1 = time.perf_counter()
        limit, _ = run_limit(cfg, s, spring, fine.mesh.xs, res)
        vals = compare(fine, limit, cfg)
        rows[spring] = ConvergenceRow(eps, dofs_fine=fine.mesh.n_dofs, dofs_limit=limit.lm.n_dofs,
                                      wall_time=t_fine + time.perf_counter() - t1, **vals)
    return rows


def run_convergence(cfg: RunConfig, eps_list=None, springs=None, mesh_scale: float = 1.0,
                    refinement_check: bool | None = None) -> ConvergenceStudy:
    """Solve the fine model for every eps and compare with the limit model.

    Failures at one eps are recorded in the report and the study goes on.
    """
    eps_list = _study_eps(cfg, cfg.study.eps_list if eps_list is None else eps_list)
    springs = list(cfg.study.springs if springs is None else springs)
    res = cfg.resolution(mesh_scale)
    reports = {sp: ConvergenceReport(sp) for sp in springs}
    timings = {}
    threads = max(1, int(os.environ.get("THINLAYER_THREADS", "1")))

    def job(eps):
        t0 = time.perf_counter()
        try:
            out = _one_eps(cfg, eps, springs, res)
        except Exception as exc:  # recorded, study continues
            log.error("eps=%g failed: %s", eps, exc)
            out = exc
        return eps, out, time.perf_counter() - t0

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(job, eps_list))
    else:
        results = [job(e) for e in eps_list]
    for eps, out, dt in results:
        timings[f"{eps:g}"] = dt
        for sp in springs:
            if isinstance(out, Exception):
                reports[sp].failures[f"{eps:g}"] = f"{type(out).__name__}: {out}"
            else:
                reports[sp].rows.append(out[sp])
    for rep in reports.values():
        rep.sort()

    refinement = {}
    do_ref = cfg.study.refinement_check if refinement_check is None else refinement_check
    if do_ref and eps_list:
        eps0 = eps_list[0]
        t0 = time.perf_counter()
        try:
            fine_rows = _one_eps(cfg, eps0, springs, cfg.resolution(mesh_scale * cfg.study.refine_factor))
            for sp in springs:
                base = [r for r in reports[sp].rows if r.epsilon == eps0]
                if not base:
                    continue
                change = {c: abs(getattr(fine_rows[sp], c) - getattr(base[0], c)) / abs(getattr(base[0], c))
                          for c in NORM_COLUMNS}
                refinement[sp] = {"epsilon": eps0, "relative_change": change,
                                  "max_change": max(change.values()),
                                  "ok": max(change.values()) < 0.05}
        except Exception as exc:
            refinement["error"] = f"{type(exc).__name__}: {exc}"
        timings["refinement"] = time.perf_counter() - t0
    return ConvergenceStudy(reports, refinement, timings, cfg)


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------

def format_row(row: ConvergenceRow) -> list:
    out = []
    for c, v in zip(COLUMNS, row.values()):
        out.append(str(int(v)) if c.startswith("dofs") else f"{v:.10e}")
    return out


def write_csv(report: ConvergenceReport, path) -> Path:
    if not report.rows:
        raise ReportError("empty report")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in report.rows:
            w.writerow(format_row(row))
    return path


def read_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != COLUMNS:
            raise ReportError(f"unexpected header {header}")
        return [row for row in r]


GNUPLOT = """\
set datafile separator ','
set logscale xy
set key top left
set xlabel 'epsilon'
set ylabel 'norm'
set format y '%.0e'
set terminal pngcairo size 900,600
set output '{png}'
plot '{csv}' every ::1 using 1:2 with linespoints title 'jump u1 error', \\
     '' every ::1 using 1:3 with linespoints title 'jump u2', \\
     '' every ::1 using 1:4 with linespoints title 'stress12 error', \\
     '' every ::1 using 1:5 with linespoints title 'stress22 error'
"""


def emit_report(study: ConvergenceStudy, out_dir) -> dict:
    """Write one CSV and one gnuplot script per spring variant plus a manifest."""
    out = Path(out_dir)
    nonempty = [r for r in study.reports.values() if r.rows]
    if not nonempty:
        raise ReportError("empty report")
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for rep in nonempty:
        csv_path = write_csv(rep, out / f"convergence_{rep.spring}.csv")
        gp = out / f"convergence_{rep.spring}.gp"
        gp.write_text(GNUPLOT.format(csv=csv_path.name, png=f"convergence_{rep.spring}.png"))
        files[rep.spring] = {"csv": str(csv_path), "plot": str(gp)}
    manifest = {
        "config_sha256": study.config.digest(),
        "config": study.config.to_dict(),
        "versions": {"thinlayer": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "timings_s": study.timings,
        "row_wall_time_s": {rep.spring: {f"{r.epsilon:g}": r.wall_time for r in rep.rows}
                            for rep in study.reports.values()},
        "failures": {rep.spring: rep.failures for rep in study.reports.values()},
        "refinement": study.refinement,
        "trends": {rep.spring: {c: rep.decreasing(c) for c in NORM_COLUMNS + ("energy_gap",)}
                   for rep in nonempty},
        "files": files,
    }
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    files["manifest"] = str(mpath)
    return files
