"""Interleaved construction of outer correctors and boundary-layer profiles.

For order m the build runs

    phi0, a0 -> (A0, Phi1) -> phi1, a1 -> (A1, Phi2) -> ... -> phi_{m+2}, a_{m+2}

where the layer step k produces (A_{k+1}, Phi_{k+2}) from the boundary traces
of the outer orders 0..k+1 and the layers of order <= k. Each member is
stored on every step of the limit time grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corrector import Background, build_corrector
from .grid import trace_array
from .layer import (LayerInputs, LayerTraces, NZ_DEFAULT, compute_C2, compute_Phi_kp2, decay_constant,
                    dPhi1_profile, profile_A0, profile_Phi1, solve_layer_bvp, source_terms,
                    stiffness_g, z_grid)
from .limit import LimitTrajectory, time_derivative

TRACE_ORDER = 4


def _per_node(x):
    """Boundary quantities as arrays over tangential nodes (length 1 in 1-D)."""
    return np.atleast_1d(np.asarray(x, dtype=float))


@dataclass
class Hierarchy:
    """All members of the expansion on the limit time grid.

    ``a``, ``phi``, ``phi_t`` list outer orders 0..m+2 with shape
    (nsteps+1,) + grid.shape; ``A`` lists layer amplitudes 0..m+1 and ``Phi``
    layer phases 0..m+2 (``Phi[0]`` is zero), each of shape (nsteps+1, ny, nZ).
    """

    m: int
    background: Background
    a: list
    phi: list
    phi_t: list
    Z: np.ndarray
    A: list
    Phi: list
    meta: dict = field(default_factory=dict)
    steps: np.ndarray | None = None
    step_dt: float | None = None

    @property
    def grid(self):
        return self.background.grid

    @property
    def dt(self) -> float:
        return self.step_dt if self.step_dt is not None else self.background.dt

    @property
    def nsteps(self) -> int:
        return int(self.steps[-1]) if self.steps is not None else len(self.background.t) - 1

    def step_of(self, t: float) -> int:
        """Global step index of time t."""
        n = int(round(t / self.dt))
        if abs(n * self.dt - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"t={t} is not on the hierarchy time grid")
        return n

    def local(self, n: int) -> int:
        """Array index of global step n."""
        if self.steps is None:
            if not 0 <= n < len(self.background.t):
                raise IndexError(f"step {n} outside the hierarchy")
            return n
        hit = np.nonzero(self.steps == n)[0]
        if not hit.size:
            raise IndexError(f"step {n} not kept in this restricted hierarchy")
        return int(hit[0])

    def restrict(self, times, half: int = 2) -> "Hierarchy":
        """Copy keeping only the steps within ``half`` of each time in ``times``."""
        keep = sorted({n + d for t in times for n in [self.step_of(t)] for d in range(-half, half + 1)})
        if keep[0] < 0 or keep[-1] > self.nsteps:
            raise ValueError("missing adjacent time steps")
        idx = [self.local(n) for n in keep]
        bg = self.background

        def take(x):
            return [None if u is None else np.ascontiguousarray(u[idx]) for u in x]

        small = Background(bg.grid, bg.t[idx], bg.phi0[idx], bg.phi0_t[idx], bg.a0[idx], bg.rho0[idx])
        return Hierarchy(self.m, small, take(self.a), take(self.phi), take(self.phi_t), self.Z,
                         take(self.A), take(self.Phi), dict(self.meta), np.array(keep), self.dt)


def _traces(fields, s, dz, J):
    """Stack [l, j, ny] boundary traces of the trajectories ``fields`` at step s."""
    out = [trace_array(f[s], dz, J, TRACE_ORDER) for f in fields]
    return np.stack([np.stack([_per_node(r) for r in tr]) for tr in out])


def order0_layers(bg: Background, nZ: int = NZ_DEFAULT):
    """(Z, A0, Phi1, dPhi1, g) on every step from the boundary traces of (a0, phi0)."""
    dz = bg.grid.dz
    abar = np.stack([_per_node(bg.a0[s][..., 0]) for s in range(len(bg.t))])
    v0 = np.stack([_per_node(trace_array(bg.phi0[s], dz, 1, TRACE_ORDER)[1]) for s in range(len(bg.t))])
    LayerInputs(abar, v0)
    _, h0 = compute_C2(abar, v0)
    Z = z_grid(float(np.min(h0)), nZ)
    A0 = np.stack([profile_A0(abar[s], v0[s], Z) for s in range(len(bg.t))])
    Phi1 = np.stack([profile_Phi1(abar[s], v0[s], A0[s], Z)[0] for s in range(len(bg.t))])
    dPhi1 = np.stack([dPhi1_profile(abar[s], v0[s], A0[s]) for s in range(len(bg.t))])
    g = np.stack([stiffness_g(abar[s], v0[s], A0[s], dPhi1[s]) for s in range(len(bg.t))])
    return Z, A0, Phi1, g, abar, v0


def layer_step(k: int, bg: Background, a, phi, phi_t, Z, A, Phi, g, abar, v0):
    """Layer order k: returns (A_{k+1}, Phi_{k+2}, diagnostics) on every step."""
    N = len(bg.t) - 1
    dz, dt = bg.grid.dz, bg.dt
    dy = bg.grid.dy if bg.grid.has_y else None
    J = k + 2
    dA_dt = [None] * k + [time_derivative(A[k], dt)]
    dPhi_dt = [time_derivative(P, dt) for P in Phi[:k + 2]]
    A_new = np.empty_like(A[0])
    Phi_new = np.empty_like(A[0])
    res = decF = decG = 0.0
    for s in range(N + 1):
        tr = LayerTraces(_traces(a[:k + 2], s, dz, J), _traces(phi[:k + 2], s, dz, J),
                         _traces(phi_t[:k + 2], s, dz, J), dy)
        F, G, Gt = source_terms(k, tr, [x[s] for x in A[:k + 1]], [x[s] for x in Phi[:k + 2]],
                                [None if x is None else x[s] for x in dA_dt],
                                [x[s] for x in dPhi_dt], Z)
        sol = solve_layer_bvp(g[s], Gt, _per_node(a[k + 1][s][..., 0]), Z)
        A_new[s] = sol.A
        Phi_new[s] = compute_Phi_kp2(sol.A, F, abar[s], v0[s], A[0][s], Z)[0]
        res = max(res, sol.residual)
        decF, decG = max(decF, decay_constant(F, Z)), max(decG, decay_constant(G, Z))
    return A_new, Phi_new, {"bvp_residual": res, "decay_F": decF, "decay_G": decG}


def build_hierarchy(traj: LimitTrajectory, m: int, nZ: int = NZ_DEFAULT) -> Hierarchy:
    """Build outer orders 0..m+2 and layers A_0..A_{m+1}, Phi_1..Phi_{m+2}."""
    if m < 0 or m > 1:
        raise ValueError("source sums are implemented for m in {0, 1}")
    bg = Background.from_trajectory(traj)
    Z, A0, Phi1, g, abar, v0 = order0_layers(bg, nZ)
    a, phi, phi_t = [bg.a0], [bg.phi0], [bg.phi0_t]
    A, Phi = [A0], [np.zeros_like(A0), Phi1]
    meta = {"m": m, "nZ": nZ, "Z_max": float(Z[-1]), "min_g": float(np.min(g)), "layers": {}}
    shape = (len(bg.t),) + bg.grid.shape[:-1]
    for n in range(1, m + 3):
        bdry = -Phi[n][..., 0].reshape(shape)
        pair = build_corrector(n - 2, bg, a, phi, phi_t, bdry)
        a.append(pair.a)
        phi.append(pair.phi)
        phi_t.append(pair.phi_t)
        k = n - 1
        if k <= m:
            A_new, Phi_new, diag = layer_step(k, bg, a, phi, phi_t, Z, A, Phi, g, abar, v0)
            A.append(A_new)
            Phi.append(Phi_new)
            meta["layers"][k] = diag
    dt = bg.dt
    meta["compat_l1"] = {j: float(np.max(np.abs(time_derivative(phi[j][..., 0].reshape(shape), dt)[0]
                                                  + time_derivative(Phi[j][..., 0], dt)[0])))
                         for j in range(1, m + 3)}
    meta["decay_A"] = [decay_constant(x, Z) for x in A]
    meta["decay_Phi"] = [decay_constant(x, Z) for x in Phi[1:]]
    return Hierarchy(m, bg, a, phi, phi_t, Z, A, Phi, meta)
