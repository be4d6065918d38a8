"""Order-0 boundary-layer profiles for a few boundary states.

For each (abar0, v0) the closed-form amplitude A0 and the phase corrector
Phi1 are tabulated together with the decay rate 2 h0 and the weighted decay
constant sup e^Z |A0|.
"""
import numpy as np

from gpwkb.layer import compute_C2, decay_constant, profile_A0, profile_Phi1, stiffness_g, dPhi1_profile

Z = np.linspace(0.0, 20.0, 4001)

print(f"{'abar0':>6s} {'v0':>6s} {'C2':>9s} {'2h0':>7s} {'A0(0)':>8s} {'Phi1(0)':>9s} {'e^Z|A0|':>8s} {'min g':>6s}")
for a, v in [(0.9, 0.0), (0.9, 0.1), (0.95, -0.2), (1.05, 0.1)]:
    C2, h0 = compute_C2(a, v)
    A = profile_A0(a, v, Z)
    P, dP = profile_Phi1(a, v, A, Z)
    g = stiffness_g(a, v, A, dPhi1_profile(a, v, A))
    print(f"{a:6.2f} {v:6.2f} {C2:9.5f} {2 * h0:7.4f} {A[0]:8.4f} {P[0]:9.5f} "
          f"{decay_constant(A, Z):8.4f} {g.min():6.3f}")

# abar0 + A0 bridges the wall value 1 to the bulk value abar0 within a few layer widths
A = profile_A0(0.9, 0.1, Z)
for Zs in (0.0, 0.5, 1.0, 2.0, 4.0):
    i = int(round(Zs / Z[1]))
    print(f"Z = {Zs:3.1f}  abar0 + A0 = {0.9 + A[i]:.6f}")
