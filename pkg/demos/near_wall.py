"""A bump launched next to the wall, so that the boundary layers are active.

In the standard scenario the bump on [1, 2] never reaches z = 0 before
T = 0.5 and every layer profile vanishes. Here the bump starts at 0.2 and
the traces (abar0, v0) at the wall move away from (1, 0).
"""
import os

import numpy as np

from gpwkb.harness import ScenarioConfig, build, run_convergence

cfg = ScenarioConfig(z1=0.2, z2=1.2, z_max=3.8, T=0.8, nz_outer=1521, nZ=2000)
H = build(cfg, 1)
n = H.step_of(cfg.T)
print(f"t = {cfg.T}: abar0 = {H.background.a0[n, 0]:.5f}, max|A0| = {np.max(np.abs(H.A[0][n])):.3e}, "
      f"Phi1(0) = {H.Phi[1][n, 0, 0]:+.3e}")

rep = run_convergence(cfg, jobs=min(4, os.cpu_count() or 1), m=1, hierarchy=H)
for kind, fit in rep.slopes.items():
    print(f"  {kind:12s} slope {fit['slope']:+.3f}  target {rep.targets[kind]:+d}")
