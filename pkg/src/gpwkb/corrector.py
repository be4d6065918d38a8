"""Linearized wave operator around the limit solution and the outer correctors.

Every corrector phase solves P(phi0, D) phi = F with Dirichlet data on z = 0,

    P f = f_tt - div(rho0 grad f) + 2 grad phi0 . grad f_t + div((grad phi0 . grad f) grad phi0)
          + grad phi0_t . grad f + lap(phi0) f_t,

and the matching amplitude follows algebraically from the Bernoulli balance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, d_y, d_z, div_coef_grad, grad_dot, lap
from .limit import CFL_MAX, CFLError, LimitTrajectory, leapfrog, time_derivative, velocity_from_levels


class GridMismatchError(ValueError):
    """Arrays do not live on the background grid or time axis."""


@dataclass
class Background:
    """Coefficients of P sampled on every step of the limit trajectory."""

    grid: Grid
    t: np.ndarray
    phi0: np.ndarray
    phi0_t: np.ndarray
    a0: np.ndarray
    rho0: np.ndarray

    @classmethod
    def from_trajectory(cls, traj: LimitTrajectory) -> "Background":
        return cls(traj.grid, traj.t, traj.phi, traj.phi_t, traj.a, traj.rho)

    @classmethod
    def flat(cls, grid: Grid, t) -> "Background":
        t = np.asarray(t, dtype=float)
        z = np.zeros((len(t),) + grid.shape)
        return cls(grid, t, z, z.copy(), np.ones_like(z), np.ones_like(z))

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def nsteps(self) -> int:
        return len(self.t) - 1

    def check(self, u) -> None:
        if np.shape(u)[-len(self.grid.shape):] != self.grid.shape:
            raise GridMismatchError(f"field shape {np.shape(u)} does not match grid {self.grid.shape}")


def _grad_parts(u, grid):
    return d_z(u, grid), (d_y(u, grid) if grid.has_y else None)


def apply_P_spatial(bg: Background, n: int, f, f_t) -> np.ndarray:
    """P f minus f_tt at step n."""
    g = bg.grid
    bg.check(f)
    p0 = bg.phi0[n]
    gp_f = grad_dot(p0, f, g)
    out = (-div_coef_grad(bg.rho0[n], f, g) + 2.0 * grad_dot(p0, f_t, g)
           + d_z(gp_f * d_z(p0, g), g) + grad_dot(bg.phi0_t[n], f, g) + lap(p0, g) * f_t)
    if g.has_y:
        out = out + d_y(gp_f * d_y(p0, g), g)
    return out


def apply_P(bg: Background, n: int, f, f_t, f_tt) -> np.ndarray:
    """P(phi0, D) f at step n given f and its first two time derivatives."""
    return np.asarray(f_tt) + apply_P_spatial(bg, n, f, f_t)


@dataclass
class WaveSolution:
    t: np.ndarray
    phi: np.ndarray
    phi_t: np.ndarray


def solve_linear_wave(bg: Background, f, g=None, init=None, g_far=None,
                      compat_tol: float = 1e-10) -> WaveSolution:
    """Leapfrog solution of P phi = f with phi(z=0) = g(t) injected into the boundary row.

    ``f`` has shape (nsteps+1,) + grid.shape (or is None for zero forcing);
    ``g`` and ``g_far`` are boundary values per step, shape (nsteps+1,) or
    (nsteps+1, ny). ``init`` is (phi, phi_t) at t = 0 (zero by default).
    """
    grid = bg.grid
    N, dt = bg.nsteps, bg.dt
    h = min(grid.dz, grid.dy) if grid.has_y else grid.dz
    if dt > CFL_MAX * h * (1 + 1e-12):
        raise CFLError(f"dt={dt:.4g} exceeds {CFL_MAX}*dz")
    shape = (N + 1,) + grid.shape
    bshape = (N + 1,) + grid.shape[:-1]
    f = np.zeros(shape) if f is None else np.asarray(f, dtype=float)
    if f.shape != shape:
        raise GridMismatchError(f"forcing shape {f.shape} != {shape}")
    g = np.zeros(bshape) if g is None else np.broadcast_to(np.asarray(g, dtype=float), bshape)
    g_far = np.zeros(bshape) if g_far is None else np.broadcast_to(np.asarray(g_far, dtype=float), bshape)
    u0, v0 = (np.zeros(grid.shape), np.zeros(grid.shape)) if init is None else init
    u0, v0 = np.asarray(u0, dtype=float), np.asarray(v0, dtype=float)
    bg.check(u0)
    if np.max(np.abs(g[0] - u0[..., 0])) > compat_tol:
        raise ValueError("boundary data at t = 0 does not match the initial trace")

    def accel(n, u, v):
        return f[n] - apply_P_spatial(bg, n, u, v)

    def boundary(n, u):
        u[..., 0] = g[n]
        u[..., -1] = g_far[n]

    U = leapfrog(u0, v0, accel, N, dt, boundary)
    return WaveSolution(bg.t, U, velocity_from_levels(U, v0, dt))


# ---------------------------------------------------------------------------
# outer corrector sources
# ---------------------------------------------------------------------------

def _member(seq, j, name):
    if j >= len(seq) or seq[j] is None:
        raise KeyError(f"missing hierarchy member {name}_{j}")
    return seq[j]


def source_fa(k: int, a, phi, grid: Grid) -> np.ndarray:
    """f^a_{k+1} = -sum_{k1=1}^{k+1} (grad phi_{k1} . grad a_{k+2-k1} + a_{k1} lap(phi_{k+2-k1}) / 2)."""
    out = 0.0
    for k1 in range(1, k + 2):
        p1, a2 = _member(phi, k1, "phi"), _member(a, k + 2 - k1, "a")
        a1, p2 = _member(a, k1, "a"), _member(phi, k + 2 - k1, "phi")
        out = out - (grad_dot(p1, a2, grid) + 0.5 * a1 * lap(p2, grid))
    return out


def source_gphi(k: int, a, phi, phi_t, grid: Grid) -> np.ndarray:
    """g^phi_{k+1}: lower-order products in the Bernoulli balance at order eps^(k+2)."""
    out = 0.0
    for k1 in range(1, k + 2):
        out = out - _member(a, k1, "a") * _member(phi_t, k + 2 - k1, "phi_t")
    for k1 in range(k + 2):
        for k2 in range(k + 2):
            k3 = k + 2 - k1 - k2
            if 0 <= k3 <= k + 1:
                out = out - 0.5 * a[k1] * (grad_dot(phi[k2], phi[k3], grid) + 2.0 * a[k2] * a[k3])
    return out


def bernoulli_rhs(k: int, a, phi, phi_t, grid: Grid) -> np.ndarray:
    """RHS_k = (lap(a_k) + 2 g^phi_{k+1}) / (2 a0); zero for the order-1 case (k = -1)."""
    if k < 0:
        return np.zeros_like(a[0])
    return (lap(a[k], grid) + 2.0 * source_gphi(k, a, phi, phi_t, grid)) / (2.0 * a[0])


def recover_amplitude(rhs, phi, phi_t, phi0, a0, grid: Grid, a_min: float = 0.5) -> np.ndarray:
    """a_{k+2} = (RHS_k - phi_t - grad phi0 . grad phi) / (2 a0)."""
    from .limit import DensityFloorError
    if np.min(a0) <= a_min:
        raise DensityFloorError(f"a0 = {np.min(a0):.4g} too small for amplitude recovery")
    return (rhs - phi_t - grad_dot(phi0, phi, grid)) / (2.0 * a0)


@dataclass
class CorrectorPair:
    """Outer corrector of order ``order`` on every step: a, phi, phi_t (time on axis 0)."""

    order: int
    t: np.ndarray
    a: np.ndarray
    phi: np.ndarray
    phi_t: np.ndarray
    rhs: np.ndarray


def build_corrector(k: int, bg: Background, a, phi, phi_t, boundary=None) -> CorrectorPair:
    """Corrector of order k+2 (k = -1 gives order 1).

    ``a``, ``phi``, ``phi_t`` list the known orders 0..k+1 as trajectories;
    ``boundary`` is -Phi_{k+2}(t, y, Z=0) per step (zero when None). The
    initial data of every corrector vanish, so the initial velocity reduces
    to RHS_k at t = 0.
    """
    grid = bg.grid
    for j in range(k + 2):
        _member(a, j, "a"), _member(phi, j, "phi"), _member(phi_t, j, "phi_t")
    N = bg.nsteps
    rhs = np.stack([bernoulli_rhs(k, [x[n] for x in a[:k + 2]], [x[n] for x in phi[:k + 2]],
                                  [x[n] for x in phi_t[:k + 2]], grid) for n in range(N + 1)])
    if k >= 0:
        rhs_t = time_derivative(rhs, bg.dt)
        F = np.stack([-2.0 * bg.a0[n] * source_fa(k, [x[n] for x in a], [x[n] for x in phi], grid)
                      + rhs_t[n] + div_coef_grad(rhs[n], bg.phi0[n], grid) for n in range(N + 1)])
    else:
        F = None
    zero = np.zeros(grid.shape)
    v0 = -grad_dot(bg.phi0[0], zero, grid) - 2.0 * bg.a0[0] * zero + rhs[0]
    sol = solve_linear_wave(bg, F, boundary, (zero, v0))
    amp = np.stack([recover_amplitude(rhs[n], sol.phi[n], sol.phi_t[n], bg.phi0[n], bg.a0[n], grid)
                    for n in range(N + 1)])
    return CorrectorPair(k + 2, bg.t, amp, sol.phi, sol.phi_t, rhs)
