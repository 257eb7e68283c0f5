"""Command line interface.

Exit codes: 0 success, 1 input error, 2 solver failure.
Set ``THINLAYER_THREADS`` to run the eps cases of ``converge`` in parallel.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .beam import PolynomialField, check_moments, decompose, sample_beam, section_quadrature, seminorms, warping
from .bending import BendingDomainError, solve_bending
from .config import SPRINGS, ConfigError, RunConfig, load_config
from .experiment import emit_report, run_convergence, run_fine, run_limit
from .fem2d import SolverError, build_mesh, recover_stress, write_trace_csv, write_vtk
from .fem2d.mesh import MeshError
from .limit import ConfigurationError, limit_traces
from .scaling import DomainError, MaterialError, ScalingError

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2
INPUT_ERRORS = (ConfigError, ConfigurationError, ScalingError, MaterialError, DomainError, MeshError,
                BendingDomainError, FileNotFoundError, OSError, ValueError)


def _config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig()


def _out(args) -> Path:
    p = Path(args.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _eps_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}")
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("eps values must be positive")
    return vals


def cmd_solve_fine(args) -> int:
    cfg = _config(args)
    s = cfg.scaling(args.eps)
    run = run_fine(cfg, s, cfg.resolution(args.mesh_scale))
    out = _out(args)
    mats = {0: cfg.mat_bulk, 1: cfg.mat_beam}
    stress = recover_stress(run.u, mats)
    write_vtk(out / "fine.vtk", run.mesh, run.u, stress)
    write_trace_csv(out / "fine_trace.csv", run.trace)
    summary = {"epsilon": s.epsilon, "r": s.r, "delta": s.delta, "regime": s.regime.value,
               "mesh": run.mesh.summary(), "energy": run.energy, "residual": run.u.residual}
    (out / "fine_summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return EXIT_OK


def cmd_solve_limit(args) -> int:
    cfg = _config(args)
    s = cfg.scaling(args.eps)
    res = cfg.resolution(args.mesh_scale)
    xs = build_mesh(s, res, cfg.domain).xs
    out = _out(args)
    for spring in args.spring or cfg.study.springs:
        sol, im = run_limit(cfg, s, spring, xs, res)
        write_vtk(out / f"limit_{spring}.vtk", sol.lm.mesh, sol.u)
        xq, _, sp_, _ = limit_traces(sol, cfg.mat_bulk)
        s12 = np.interp(sol.x, xq, sp_[:, 2])
        s22 = np.interp(sol.x, xq, sp_[:, 1])
        np.savetxt(out / f"limit_{spring}_trace.csv",
                   np.column_stack([sol.x, sol.jump[:, 0], sol.jump[:, 1], s12, s22]),
                   delimiter=",", header="x,jump_u1,jump_u2,sigma12_plus,sigma22_plus",
                   comments="", fmt="%.12e")
        print(json.dumps({"spring": spring, "k": im.k, "energy": sol.energy(),
                          "max_jump_u1": float(np.abs(sol.jump[:, 0]).max()), "dofs": sol.lm.n_dofs}))
    return EXIT_OK


def cmd_bending(args) -> int:
    sol = solve_bending(args.load, [args.u_minus], [args.u_plus], n=args.n)
    out = _out(args)
    sol.to_csv(out / "bending.csv")
    print(json.dumps({"midpoint": float(sol.at(0.5)[0, 0]), "energy": sol.energy()}))
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = _config(args)
    springs = args.spring or None
    study = run_convergence(cfg, args.eps_list, springs, args.mesh_scale)
    files = emit_report(study, args.out_dir)
    failed = False
    for spring, rep in study.reports.items():
        for row in rep.rows:
            print(f"{spring:>5} eps={row.epsilon:<6g} jump_u1_err={row.jump_u1_err:.3e} "
                  f"jump_u2={row.jump_u2:.3e} stress12_err={row.stress12_err:.3e} "
                  f"stress22_err={row.stress22_err:.3e} energy_gap={row.energy_gap:.3e}")
        for eps, msg in rep.failures.items():
            print(f"{spring:>5} eps={eps} FAILED: {msg}", file=sys.stderr)
            failed = True
    print(f"wrote {files['manifest']}")
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_decompose_demo(args) -> int:
    rng = np.random.default_rng(args.seed)
    r, d = 0.05, 0.5
    fieldf = PolynomialField.random(rng, r, d)
    quad = section_quadrature(r, 6, 24)
    z = np.linspace(0.0, d, 41)
    sample = sample_beam(fieldf, quad, z, jac=fieldf.jacobian)
    frame = decompose(sample)
    res = check_moments(warping(sample, frame), quad)
    norms = seminorms(sample, frame)
    out = _out(args)
    frame.to_csv(out / "beam_frame.csv")
    print(json.dumps({"moment_residual": res.max_abs(), "seminorms": norms.__dict__}, default=float))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thinlayer", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(q, spring=False):
        q.add_argument("--config", help="TOML configuration file")
        q.add_argument("--out-dir", default="out")
        q.add_argument("--mesh-scale", type=float, default=1.0)
        if spring:
            q.add_argument("--spring", choices=SPRINGS, action="append",
                           help="spring variant (repeatable; default: all in config)")

    q = sub.add_parser("solve-fine", help="solve the resolved-beam model")
    common(q)
    q.add_argument("--eps", type=float, default=None)
    q.set_defaults(func=cmd_solve_fine)

    q = sub.add_parser("solve-limit", help="solve the interface-spring model")
    common(q, spring=True)
    q.add_argument("--eps", type=float, default=None)
    q.set_defaults(func=cmd_solve_limit)

    q = sub.add_parser("bending", help="clamped beam profile")
    q.add_argument("--load", type=float, default=1.0)
    q.add_argument("--u-minus", type=float, default=0.0)
    q.add_argument("--u-plus", type=float, default=0.0)
    q.add_argument("--n", type=int, default=201)
    q.add_argument("--out-dir", default="out")
    q.set_defaults(func=cmd_bending)

    q = sub.add_parser("converge", help="fine-versus-limit convergence study")
    common(q, spring=True)
    q.add_argument("--eps-list", type=_eps_list, default=None)
    q.set_defaults(func=cmd_converge)

    q = sub.add_parser("decompose-demo", help="decompose a random beam field")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out-dir", default="out")
    q.set_defaults(func=cmd_decompose_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
