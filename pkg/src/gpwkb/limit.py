"""Limit (eps -> 0) system in its second-order wave form.

The phase solves

    phi_tt - lap(phi) + grad(phi).grad(phi_t) + div((phi_t + |grad phi|^2/2) grad phi) = 0

with phi = 0 at z = 0 (and at the truncated far end), and the amplitude is
recovered from the Bernoulli relation rho = 1 - phi_t - |grad phi|^2/2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, RealField, d_y, d_z, deriv, grad_dot, integrate, lap

RHO_MIN = 0.25
CFL_MAX = 0.4


class CFLError(ValueError):
    """Time step too large for the explicit leapfrog scheme."""


class DensityFloorError(RuntimeError):
    """Recovered density dropped to the floor; ``t`` is the first bad time."""

    def __init__(self, msg, t=None):
        super().__init__(msg)
        self.t = t


def _values(x):
    return np.asarray(getattr(x, "values", x), dtype=float)


def initial_velocity(a00, phi00, grid: Grid) -> np.ndarray:
    """phi_t at t = 0 forced by the Bernoulli relation: 1 - a00^2 - |grad phi00|^2 / 2."""
    a00, phi00 = _values(a00), _values(phi00)
    return 1.0 - a00 ** 2 - 0.5 * grad_dot(phi00, phi00, grid)


def recover_density(phi0, dphi0_dt, grid: Grid, rho_min: float = RHO_MIN):
    """Return (rho0, a0) from the phase and its time derivative."""
    phi0, dphi0_dt = _values(phi0), _values(dphi0_dt)
    rho = 1.0 - dphi0_dt - 0.5 * grad_dot(phi0, phi0, grid)
    if np.min(rho) <= rho_min:
        raise DensityFloorError(f"density {np.min(rho):.4g} below floor {rho_min}")
    return rho, np.sqrt(rho)


@dataclass(frozen=True)
class LimitState:
    t: float
    phi0: RealField
    dphi0_dt: RealField
    a0: RealField
    rho0: RealField


@dataclass
class LimitTrajectory:
    """Limit solution sampled at every step of a uniform time grid.

    Arrays carry time on axis 0; ``initial`` holds (a00, phi00, phi01).
    """

    grid: Grid
    t: np.ndarray
    phi: np.ndarray
    phi_t: np.ndarray
    a: np.ndarray
    rho: np.ndarray
    initial: tuple

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __len__(self):
        return len(self.t)

    def state(self, n: int) -> LimitState:
        g = self.grid
        return LimitState(float(self.t[n]), RealField(g, self.phi[n]), RealField(g, self.phi_t[n]),
                          RealField(g, self.a[n]), RealField(g, self.rho[n]))


def _rhs(phi, psi, grid):
    """phi_tt given phi and an approximation psi of phi_t."""
    q = psi + 0.5 * grad_dot(phi, phi, grid)
    out = lap(phi, grid) - grad_dot(phi, psi, grid) - d_z(q * d_z(phi, grid), grid)
    if grid.has_y:
        out = out - d_y(q * d_y(phi, grid), grid)
    return out


def time_derivative(U, dt: float, order: int = 2) -> np.ndarray:
    """Centered time derivative of a stored trajectory (one-sided at the ends)."""
    return deriv(U, dt, 1, order, axis=0)


def step_count(T: float, dt: float) -> tuple[int, float]:
    """Number of steps reaching T exactly with a step no larger than dt."""
    n = max(1, int(np.ceil(T / dt - 1e-9)))
    return n, T / n


def leapfrog(u0, v0, accel, nsteps: int, dt: float, boundary=None) -> np.ndarray:
    """Second-order leapfrog for u_tt = accel(n, u, u_t).

    The velocity passed to ``accel`` is extrapolated from the last three
    levels, which keeps the scheme explicit and second order. ``boundary(n, u)``
    imposes Dirichlet rows on level n in place.
    """
    U = np.empty((nsteps + 1,) + np.shape(u0))
    U[0] = u0
    U[1] = u0 + dt * v0 + 0.5 * dt ** 2 * accel(0, u0, v0)
    if boundary is not None:
        boundary(1, U[1])
    for n in range(1, nsteps):
        if n == 1:
            v = 2.0 * (U[1] - U[0]) / dt - v0
        else:
            v = (3.0 * U[n] - 4.0 * U[n - 1] + U[n - 2]) / (2.0 * dt)
        U[n + 1] = 2.0 * U[n] - U[n - 1] + dt ** 2 * accel(n, U[n], v)
        if boundary is not None:
            boundary(n + 1, U[n + 1])
    return U


def velocity_from_levels(U, v0, dt: float) -> np.ndarray:
    """Centered u_t on stored levels; the exact initial velocity is kept at n = 0."""
    V = time_derivative(U, dt)
    V[0] = v0
    return V


def solve_phi0(a00, phi00, T: float, grid: Grid, dt: float | None = None, extra_steps: int = 0,
               rho_min: float = RHO_MIN) -> LimitTrajectory:
    """Integrate the limit wave equation up to T (plus ``extra_steps`` steps beyond).

    ``dt`` defaults to the largest step allowed by the CFL bound 0.4*min(dz, dy)
    that lands exactly on T.
    """
    a00, phi00 = _values(a00), _values(phi00)
    h = min(grid.dz, grid.dy) if grid.has_y else grid.dz
    if dt is None:
        dt = CFL_MAX * h
    if dt > CFL_MAX * h * (1 + 1e-12):
        raise CFLError(f"dt={dt:.4g} exceeds {CFL_MAX}*dz={CFL_MAX * h:.4g}")
    nsteps, dt = step_count(T, dt)
    nsteps += extra_steps
    if np.any(np.abs(phi00[..., 0]) > 0):
        raise ValueError("initial phase must vanish on z = 0")
    phi01 = initial_velocity(a00, phi00, grid)

    def accel(n, u, v):
        rho = 1.0 - v - 0.5 * grad_dot(u, u, grid)
        if np.min(rho) <= rho_min:
            raise DensityFloorError(f"density floor hit at t={n * dt:.4g}", t=n * dt)
        return _rhs(u, v, grid)

    def boundary(n, u):
        u[..., 0] = 0.0
        u[..., -1] = 0.0

    P = leapfrog(phi00, phi01, accel, nsteps, dt, boundary)
    Pt = velocity_from_levels(P, phi01, dt)
    rho = np.empty_like(P)
    for n in range(len(P)):
        try:
            rho[n], _ = recover_density(P[n], Pt[n], grid, rho_min)
        except DensityFloorError as exc:
            raise DensityFloorError(str(exc), t=n * dt) from None
    t = dt * np.arange(nsteps + 1)
    return LimitTrajectory(grid, t, P, Pt, np.sqrt(rho), rho, (a00, phi00, phi01))


def energy_tan(traj: LimitTrajectory, s: int = 1) -> np.ndarray:
    """Tangential energy E_{s,tan}(t) for s <= 2 at every stored step.

    Sum over tangential derivatives T^l (products of d_t and d_y, l < s) of
    ||d_t T^l phi0||^2 + ||grad T^l phi0||^2.
    """
    if s not in (1, 2):
        raise ValueError("energy_tan supports s in {1, 2}")
    g = traj.grid

    def piece(u, ut):
        e = np.array([integrate(ut[n] ** 2 + grad_dot(u[n], u[n], g), g) for n in range(len(u))])
        return e

    E = piece(traj.phi, traj.phi_t)
    if s == 2:
        ptt = time_derivative(traj.phi_t, traj.dt)
        E = E + piece(traj.phi_t, ptt)
        if g.has_y:
            py = d_y(traj.phi, g)
            E = E + piece(py, d_y(traj.phi_t, g))
    return E

