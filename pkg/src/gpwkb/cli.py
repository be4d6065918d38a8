"""Command-line entry point: ``gpwkb <subcommand> [--config ...] [--out ...] ...``."""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import gp as gpsolver
from .grid import ComplexField, RealField, write_field_csv
from .harness import (ConfigError, StageError, build, initial_data, load_config, read_errors_csv,
                      run_convergence, summarize, write_report, write_slope_files, _jsonable)
from .layer import write_profile
from .limit import energy_tan, solve_phi0
from .wkb import assemble_window, residuals

SUBCOMMANDS = ("limit-solve", "layer-profile", "wkb-build", "gp-solve", "residual", "converge", "report")


def _eps_list(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _parser():
    p = argparse.ArgumentParser(prog="gpwkb", description="WKB/boundary-layer approximation of the semiclassical "
                                "Gross-Pitaevskii equation on a half-space.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="flat 'key = value' scenario file")
        s.add_argument("--out", help="output directory (overrides the config 'out' key)")
        s.add_argument("--eps", type=_eps_list, help="comma-separated eps list, strictly decreasing")
        s.add_argument("--order", type=int, help="expansion order m")
        s.add_argument("--jobs", type=int, default=1, help="parallel eps runs")
    return p


def _tag(eps):
    return f"{eps:g}"


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)


def cmd_limit_solve(cfg, out, args):
    g = cfg.outer_grid
    a00, p00 = initial_data(cfg, g)
    traj = solve_phi0(a00, p00, cfg.T, g)
    write_field_csv(os.path.join(out, "limit_phi0.csv"), RealField(g, traj.phi[-1]))
    write_field_csv(os.path.join(out, "limit_a0.csv"), RealField(g, traj.a[-1]))
    E = energy_tan(traj, 1)
    _write_json(os.path.join(out, "limit.json"), {"T": cfg.T, "steps": len(traj) - 1, "dt": traj.dt,
                                                  "min_rho": float(np.min(traj.rho)),
                                                  "E1tan_initial": float(E[0]), "E1tan_final": float(E[-1])})


def cmd_layer_profile(cfg, out, args):
    H = build(cfg)
    n = H.step_of(cfg.T)
    for j, A in enumerate(H.A):
        Phi = H.Phi[j + 1]
        write_profile(os.path.join(out, f"layer_{j}"), H.Z, A[n][0], Phi[n][0])
    _write_json(os.path.join(out, "layer.json"), {"t": cfg.T, **H.meta})


def cmd_wkb_build(cfg, out, args):
    H = build(cfg)
    for eps in cfg.eps:
        grid = cfg.gp_grid(eps)
        E = assemble_window(H, eps, grid, cfg.T)
        write_field_csv(os.path.join(out, f"wkb_eps{_tag(eps)}.csv"), ComplexField(grid, E.psi(2)))


def cmd_gp_solve(cfg, out, args):
    for eps in cfg.eps:
        grid = cfg.gp_grid(eps)
        a00, p00 = initial_data(cfg, grid)
        traj = gpsolver.solve(a00 * np.exp(1j * p00 / eps), cfg.T, eps, grid,
                              dt=cfg.dt_factor * gpsolver.default_dt(eps, grid), save_times=cfg.sample_times)
        write_field_csv(os.path.join(out, f"gp_eps{_tag(eps)}.csv"), ComplexField(grid, traj.at(cfg.T)))
        _write_json(os.path.join(out, f"gp_eps{_tag(eps)}.json"), traj.meta)


def cmd_residual(cfg, out, args):
    H = build(cfg)
    rec = {}
    for eps in cfg.eps:
        grid = cfg.gp_grid(eps)
        rec[_tag(eps)] = {}
        for t in cfg.sample_times:
            R = residuals(assemble_window(H, eps, grid, t))
            rec[_tag(eps)][f"{t:g}"] = {**R.norms, "identity_error": R.identity_error,
                                        "stencil_tolerance": R.stencil_tolerance}
    _write_json(os.path.join(out, "residual.json"), rec)


def cmd_converge(cfg, out, args):
    report = run_convergence(cfg, jobs=max(1, args.jobs))
    write_report(out, report)
    _print_summary(report.slopes, report.targets, report.passed)


def cmd_report(cfg, out, args):
    rows = read_errors_csv(os.path.join(out, "errors.csv"))
    slopes, tg, passed = summarize(rows, cfg.m)
    write_slope_files(out, rows)
    _write_json(os.path.join(out, "report.json"), {"m": cfg.m, "slopes": slopes, "targets": tg, "pass": passed})
    _print_summary(slopes, tg, passed)


def _print_summary(slopes, tg, passed):
    for kind in slopes:
        s = slopes[kind]
        shown = "n/a" if s is None else f"{s['slope']:+.3f}"
        flag = "n/a" if passed[kind] is None else ("PASS" if passed[kind] else "FAIL")
        print(f"{kind:12s} slope {shown:>7s} target {tg[kind]:+d} {flag}")


COMMANDS = {"limit-solve": cmd_limit_solve, "layer-profile": cmd_layer_profile, "wkb-build": cmd_wkb_build,
            "gp-solve": cmd_gp_solve, "residual": cmd_residual, "converge": cmd_converge, "report": cmd_report}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        overrides = {"eps": args.eps, "m": args.order, "out": args.out}
        cfg = load_config(args.config, **overrides)
        os.makedirs(cfg.out, exist_ok=True)
        COMMANDS[args.command](cfg, cfg.out, args)
    except (ConfigError, StageError, OSError, ValueError) as exc:
        print(f"gpwkb {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
