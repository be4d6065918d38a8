"""Reference solver for i eps Psi_t + eps^2/2 lap(Psi) - (|Psi|^2 - 1) Psi = 0.

Dirichlet value 1 on z = 0 and at the truncated far end z = z_max, periodic
in y. Strang splitting: pointwise potential half-steps (which keep |Psi| and
hence the boundary value) around an exact kinetic step for u = Psi - 1 in the
sine basis (and Fourier basis in y).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dst, fft, fftfreq, idst, ifft

from .grid import ComplexField, Grid, deriv, deriv_periodic, integrate

MIN_RESOLUTION = 16
DT_SAFETY = 0.25
DT_PHASE_CAP = 0.1


class GPError(RuntimeError):
    """Resolution, step-size or finiteness failure in the GP solve."""


@dataclass
class GPState:
    t: float
    psi: np.ndarray
    eps: float
    grid: Grid

    def field(self) -> ComplexField:
        return ComplexField(self.grid, self.psi)


def default_dt(eps: float, grid: Grid) -> float:
    """0.25 eps dz^2 / (eps^2/2), capped at 0.1 eps."""
    return min(DT_SAFETY * eps * grid.dz ** 2 / (0.5 * eps ** 2), DT_PHASE_CAP * eps)


def _wavenumbers(grid: Grid):
    kz = np.pi * np.arange(1, grid.nz - 1) / grid.z_max
    k2 = kz ** 2
    if grid.has_y:
        ky = 2.0 * np.pi * fftfreq(grid.ny, grid.dy)
        k2 = k2[None, :] + ky[:, None] ** 2
    return k2


def _check(eps, grid):
    if grid.dz > eps / MIN_RESOLUTION * (1 + 1e-12):
        raise GPError(f"dz={grid.dz:.4g} does not resolve eps/{MIN_RESOLUTION}")


def _potential(psi, h):
    return psi * np.exp(-1j * (np.abs(psi) ** 2 - 1.0) * h)


class _Kinetic:
    def __init__(self, eps, grid, dt):
        self.grid = grid
        self.mult = np.exp(-0.5j * eps * _wavenumbers(grid) * dt)

    def __call__(self, psi):
        u = psi[..., 1:-1] - 1.0
        if self.grid.has_y:
            u = fft(u, axis=0)
        u = idst(self.mult * dst(u, type=1, axis=-1), type=1, axis=-1)
        if self.grid.has_y:
            u = ifft(u, axis=0)
        out = psi.copy()
        out[..., 1:-1] = 1.0 + u
        return out


def step_strang(state: GPState, dt: float) -> GPState:
    """One Strang step: potential half-step, exact kinetic step, potential half-step."""
    _check(state.eps, state.grid)
    if dt <= 0 or dt > DT_PHASE_CAP * state.eps * (1 + 1e-12):
        raise GPError(f"dt={dt:.4g} outside (0, {DT_PHASE_CAP}*eps]")
    h = dt / (2.0 * state.eps)
    psi = _potential(state.psi, h)
    psi = _Kinetic(state.eps, state.grid, dt)(psi)
    psi = _potential(psi, h)
    return GPState(state.t + dt, psi, state.eps, state.grid)


def gl_energy(state: GPState) -> float:
    """int eps^2/2 |grad Psi|^2 + (|Psi|^2 - 1)^2 / 2.

    The gradient part is evaluated exactly in the sine (and Fourier) basis of
    u = Psi - 1 by Parseval; the potential part by trapezoidal quadrature.
    """
    g = state.grid
    u = state.psi[..., 1:-1] - 1.0
    n1 = g.nz - 1
    c = dst(u, type=1, axis=-1) / n1
    Lz = g.z_max
    if g.has_y:
        c = fft(c, axis=0) / g.ny
        kin = np.sum(np.abs(c) ** 2 * _wavenumbers(g)) * (Lz / 2.0) * (g.ny * g.dy)
    else:
        kin = np.sum(np.abs(c) ** 2 * _wavenumbers(g)) * (Lz / 2.0)
    pot = 0.5 * integrate((np.abs(state.psi) ** 2 - 1.0) ** 2, g)
    return float(0.5 * state.eps ** 2 * kin + pot)


def madelung_observables(state: GPState, order: int = 4):
    """(density |Psi|^2, momentum eps Im(conj(Psi) grad Psi)); momentum is (J_z, J_y or None)."""
    g, psi = state.grid, state.psi
    rho = np.abs(psi) ** 2
    Jz = state.eps * np.imag(np.conj(psi) * deriv(psi, g.dz, 1, order, axis=-1))
    Jy = None
    if g.has_y:
        Jy = state.eps * np.imag(np.conj(psi) * deriv_periodic(psi, g.dy, 1, order, axis=-2))
    return rho, (Jz, Jy)


@dataclass
class GPTrajectory:
    eps: float
    grid: Grid
    t: list
    psi: list
    energy: list
    meta: dict = field(default_factory=dict)

    def at(self, t: float) -> np.ndarray:
        for tt, p in zip(self.t, self.psi):
            if abs(tt - t) <= 1e-12 * max(1.0, abs(t)):
                return p
        raise KeyError(f"no saved state at t={t}")


def solve(psi_init, T: float, eps: float, grid: Grid, dt: float | None = None,
          save_times=None) -> GPTrajectory:
    """Integrate from t = 0 to T saving at ``save_times`` (default {T}).

    The step is ``dt`` (default ``default_dt``) shrunk per segment so every
    save time is hit exactly. Metadata records boundary and energy drift.
    """
    _check(eps, grid)
    psi = np.array(psi_init, dtype=complex)
    if psi.shape != grid.shape:
        raise GPError(f"initial state shape {psi.shape} != grid {grid.shape}")
    if np.max(np.abs(psi[..., 0] - 1.0)) > 1e-12 or np.max(np.abs(psi[..., -1] - 1.0)) > 1e-12:
        raise GPError("initial state must equal 1 on both boundaries")
    psi[..., 0] = 1.0
    psi[..., -1] = 1.0
    dt_max = default_dt(eps, grid) if dt is None else float(dt)
    saves = sorted(set([float(T)] if save_times is None else [float(s) for s in save_times]))
    if saves[0] < 0 or saves[-1] > T + 1e-12:
        raise GPError("save times must lie in [0, T]")
    state = GPState(0.0, psi, eps, grid)
    E0 = gl_energy(state)
    traj = GPTrajectory(eps, grid, [], [], [])
    bdrift = 0.0
    nsteps = 0
    t_prev = 0.0
    for ts in saves:
        span = ts - t_prev
        n = int(np.ceil(span / dt_max - 1e-9)) if span > 0 else 0
        if n:
            h = span / n
            kin = _Kinetic(eps, grid, h)
            half = h / (2.0 * eps)
            p = state.psi
            for _ in range(n):
                p = _potential(kin(_potential(p, half)), half)
                bdrift = max(bdrift, float(np.max(np.abs(p[..., 0] - 1.0))))
            if not np.all(np.isfinite(p)):
                raise GPError(f"non-finite state before t={ts}")
            state = GPState(ts, p, eps, grid)
            nsteps += n
        t_prev = ts
        traj.t.append(ts)
        traj.psi.append(state.psi.copy())
        traj.energy.append(gl_energy(state))
    drift = max(abs(e - E0) for e in traj.energy) / max(abs(E0), np.finfo(float).tiny)
    traj.meta = {"eps": eps, "nz": grid.nz, "z_max": grid.z_max, "dt_max": dt_max, "steps": nsteps,
                 "energy0": E0, "energy_drift": drift, "boundary_drift": bdrift}
    return traj
