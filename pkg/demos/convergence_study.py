"""Convergence of the WKB/boundary-layer approximation on the standard scenario.

Builds the hierarchy once per order, runs the GP solver for each eps and fits
log-log slopes of the error norms. Takes about a minute with four workers.
"""
import os

from gpwkb.harness import ScenarioConfig, run_convergence, write_report

cfg = ScenarioConfig()
jobs = min(4, os.cpu_count() or 1)
for m in (0, 1):
    rep = run_convergence(cfg, jobs=jobs, m=m)
    print(f"order m = {m}")
    for kind, fit in rep.slopes.items():
        print(f"  {kind:12s} slope {fit['slope']:+.3f}  target {rep.targets[kind]:+d}  "
              f"{'PASS' if rep.passed[kind] else 'FAIL'}")
    write_report(f"out_m{m}", rep)

# errors.csv, report.json and slope_<norm>.dat are now in out_m0/ and out_m1/
