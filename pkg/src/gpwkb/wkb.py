"""Assembly of the composite WKB approximation and its residuals.

    a^{eps,m}   = sum_{j<=m+1} eps^j (a_j + [A_j]_eps)
    phi^{eps,m} = sum_{j<=m+2} eps^j (phi_j + [Phi_j]_eps)      (Phi_0 = 0)
    Psi^{a,m}   = a^{eps,m} exp(i phi^{eps,m} / eps)

with [F]_eps(z) = F(z/eps). Outer members are interpolated from the
hierarchy grid to the target grid; time derivatives use five-point centered
differences over hierarchy steps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator, make_interp_spline

from .grid import Grid, deriv, grad_dot, integrate, lap

MIN_RESOLUTION = 16
TIME_STENCIL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


class UnresolvedLayerError(ValueError):
    """Target grid too coarse to resolve the layer scale eps."""


class IncompleteHierarchyError(ValueError):
    """Hierarchy lacks members needed for the requested order."""


def rescale_layer(Z, F, eps: float, grid: Grid) -> np.ndarray:
    """Sample F at Z = z/eps by monotone cubic interpolation; zero beyond eps*Z_max."""
    if grid.dz > eps / MIN_RESOLUTION * (1 + 1e-12):
        raise UnresolvedLayerError(f"dz={grid.dz:.4g} does not resolve eps/{MIN_RESOLUTION}={eps / MIN_RESOLUTION:.4g}")
    F = np.asarray(F, dtype=float)
    Zs = grid.z / eps
    inside = Zs <= Z[-1]
    out = np.zeros(F.shape[:-1] + grid.z.shape)
    if np.any(F):
        # denormal-sized slopes overflow harmlessly in the derivative estimate
        with np.errstate(over="ignore", invalid="ignore"):
            out[..., inside] = PchipInterpolator(Z, F, axis=-1)(Zs[inside])
    if grid.has_y:
        out = np.broadcast_to(out.reshape((-1, grid.nz)), grid.shape).copy()
    else:
        out = out.reshape(grid.shape)
    return out


def interp_outer(u, src: Grid, dst: Grid) -> np.ndarray:
    """Quintic spline interpolation in z from the hierarchy grid to ``dst`` (same y nodes)."""
    if src.has_y != dst.has_y or (src.has_y and src.ny != dst.ny):
        raise ValueError("outer and target grids must share the tangential nodes")
    if dst.z_max > src.z_max * (1 + 1e-12):
        raise ValueError("target grid extends beyond the hierarchy grid")
    if src.nz == dst.nz and np.isclose(src.z_max, dst.z_max):
        return np.array(u, dtype=float)
    return make_interp_spline(src.z, np.asarray(u, dtype=float), k=5, axis=-1)(dst.z)


@dataclass
class WKBExpansion:
    """Assembled (a^{eps,m}, phi^{eps,m}) on consecutive hierarchy steps (time on axis 0)."""

    m: int
    eps: float
    grid: Grid
    t: np.ndarray
    a: np.ndarray
    phi: np.ndarray
    parts: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def psi(self, i: int) -> np.ndarray:
        return self.a[i] * np.exp(1j * self.phi[i] / self.eps)


def assemble(H, eps: float, grid: Grid, steps, m: int | None = None) -> WKBExpansion:
    """Composite approximation on the global hierarchy steps ``steps`` for order m (default H.m)."""
    m = H.m if m is None else m
    if len(H.a) < m + 2 or len(H.phi) < m + 3 or len(H.A) < m + 2 or len(H.Phi) < m + 3:
        raise IncompleteHierarchyError(f"order {m} needs a_0..a_{m + 1}, phi_0..phi_{m + 2} and layers")
    steps = list(steps)
    a_out = np.empty((len(steps),) + grid.shape)
    p_out = np.empty_like(a_out)
    for i, n in enumerate(steps):
        s = H.local(n)
        a = sum(eps ** j * (interp_outer(H.a[j][s], H.grid, grid) + rescale_layer(H.Z, H.A[j][s], eps, grid))
                for j in range(m + 2))
        p = sum(eps ** j * interp_outer(H.phi[j][s], H.grid, grid) for j in range(m + 3))
        p = p + sum(eps ** j * rescale_layer(H.Z, H.Phi[j][s], eps, grid) for j in range(1, m + 3))
        a_out[i], p_out[i] = a, p
    return WKBExpansion(m, eps, grid, H.dt * np.array(steps, dtype=float), a_out, p_out)


def assemble_window(H, eps: float, grid: Grid, t: float, m: int | None = None) -> WKBExpansion:
    """Five consecutive steps centered at time t (for time differencing)."""
    n = H.step_of(t)
    if n < 2 or n + 2 > H.nsteps:
        raise ValueError("missing adjacent time steps around t")
    return assemble(H, eps, grid, range(n - 2, n + 3), m)


def time_derivative_center(U, dt: float, i: int) -> np.ndarray:
    """Fourth-order centered d/dt at index i of a stored sequence."""
    if i < 2 or i + 2 >= len(U):
        raise ValueError("missing adjacent time steps")
    return np.tensordot(TIME_STENCIL, U[i - 2:i + 3], axes=(0, 0)) / dt


def gp_operator(psi_t, psi, eps: float, grid: Grid, order: int = 4) -> np.ndarray:
    """i eps psi_t + eps^2/2 lap(psi) - (|psi|^2 - 1) psi."""
    return 1j * eps * psi_t + 0.5 * eps ** 2 * lap(psi, grid, order) - (np.abs(psi) ** 2 - 1.0) * psi


@dataclass
class ResidualRecord:
    R_a: np.ndarray
    R_phi: np.ndarray
    gp: np.ndarray
    norms: dict
    identity_error: float
    stencil_tolerance: float


def residuals(exp: WKBExpansion, i: int = 2, order: int = 4) -> ResidualRecord:
    """Hydrodynamic residuals and GP(Psi^{a,m}) at index i of the expansion window.

    The identity GP(Psi) = (-a R_phi + eps^2/2 lap(a) + i eps R_a) exp(i phi/eps)
    is cross-checked; ``stencil_tolerance`` is the difference between the GP
    residual evaluated with second- and fourth-order space stencils.
    """
    g, eps, dt = exp.grid, exp.eps, exp.dt
    a, phi = exp.a[i], exp.phi[i]
    a_t = time_derivative_center(exp.a, dt, i)
    phi_t = time_derivative_center(exp.phi, dt, i)
    R_a = a_t + grad_dot(phi, a, g, order) + 0.5 * a * lap(phi, g, order)
    R_phi = phi_t + 0.5 * grad_dot(phi, phi, g, order) + a ** 2 - 1.0
    psis = np.stack([exp.psi(j) for j in range(len(exp.t))])
    psi = psis[i]
    psi_t = time_derivative_center(psis, dt, i)
    gp4 = gp_operator(psi_t, psi, eps, g, order)
    gp2 = gp_operator(psi_t, psi, eps, g, 2)
    madelung = (-a * R_phi + 0.5 * eps ** 2 * lap(a, g, order) + 1j * eps * R_a) * np.exp(1j * phi / eps)
    # boundary rows use one-sided stencils; the comparison is over interior nodes
    sl = (Ellipsis, slice(1, -1))
    ident = float(np.max(np.abs(gp4 - madelung)[sl]))
    tol = float(np.max(np.abs(gp4 - gp2)[sl]))
    norms = {"gp_L2": float(np.sqrt(integrate(np.abs(gp4) ** 2, g))),
             "gp_sup": float(np.max(np.abs(gp4))),
             "R_a_L2": float(np.sqrt(integrate(R_a ** 2, g))),
             "R_phi_L2": float(np.sqrt(integrate(R_phi ** 2, g)))}
    return ResidualRecord(R_a, R_phi, gp4, norms, ident, tol)


def madelung_observables(psi, eps: float, grid: Grid, order: int = 4):
    """Density |psi|^2 and current eps Im(conj(psi) grad psi) as (rho, J_z, J_y or None)."""
    rho = np.abs(psi) ** 2
    Jz = eps * np.imag(np.conj(psi) * deriv(psi, grid.dz, 1, order, axis=-1))
    Jy = None
    if grid.has_y:
        from .grid import deriv_periodic
        Jy = eps * np.imag(np.conj(psi) * deriv_periodic(psi, grid.dy, 1, order, axis=-2))
    return rho, Jz, Jy


def boundary_values(exp: WKBExpansion):
    """Max deviation of a^{eps,m} from 1 and of phi^{eps,m} from 0 on z = 0."""
    return float(np.max(np.abs(exp.a[..., 0] - 1.0))), float(np.max(np.abs(exp.phi[..., 0])))
