"""Boundary-layer profiles in the fast variable Z = z/eps.

Order 0 has a closed form for the amplitude correction A0 and the phase
correction Phi1. Higher orders solve the coercive linear problem

    A'' = g A + Gt,   A(0) = -abar_{k+1},   A -> 0,

followed by a tail integration for Phi_{k+2}. The sources (F_k, G_k) are the
finite multi-index sums obtained by collecting powers of eps after inserting
Taylor-expanded outer traces and the layer profiles into the hydrodynamic
equations.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.linalg import solve_banded

from .grid import deriv, deriv_periodic

Z_FLOOR = 20.0
NZ_DEFAULT = 4000
H0_MIN_SQ = 0.25


class LayerError(ValueError):
    """Inputs outside the admissible ball or a non-decaying/incoercive problem."""


def _col(x):
    return np.asarray(x, dtype=float)[..., None]


def z_max_for(h0) -> float:
    return max(Z_FLOOR, Z_FLOOR / float(np.min(h0)))


def z_grid(h0=1.0, nZ: int = NZ_DEFAULT) -> np.ndarray:
    """Uniform Z-grid on [0, max(20, 20/h0)] with nZ intervals."""
    return np.linspace(0.0, z_max_for(h0), nZ + 1)


@dataclass(frozen=True)
class LayerInputs:
    """Order-0 boundary data (abar0, v0) at one time, per tangential node."""

    a0bar: np.ndarray
    v0: np.ndarray

    def __post_init__(self):
        a, v = np.asarray(self.a0bar, dtype=float), np.asarray(self.v0, dtype=float)
        if np.any(a <= 0):
            raise LayerError("boundary amplitude must be positive")
        if np.any(a ** 2 - v ** 2 < H0_MIN_SQ):
            raise LayerError("inputs violate abar0^2 - v0^2 >= 1/4")
        object.__setattr__(self, "a0bar", a)
        object.__setattr__(self, "v0", v)


def compute_C2(a0bar, v0):
    """Return (C2, h0) with h0 = sqrt(abar0^2 - v0^2)."""
    a0bar, v0 = np.asarray(a0bar, dtype=float), np.asarray(v0, dtype=float)
    h2 = a0bar ** 2 - v0 ** 2
    if np.any(h2 <= 0) or np.any(np.abs(v0) >= 1):
        raise LayerError("need abar0^2 > v0^2 and |v0| < 1")
    h0 = np.sqrt(h2)
    C2 = (1.0 - a0bar ** 2) / (np.sqrt(1.0 - v0 ** 2) + h0) ** 2
    return C2, h0


def profile_A0(a0bar, v0, Z) -> np.ndarray:
    """Closed-form order-0 amplitude profile, decaying like exp(-2 h0 Z)."""
    C2, h0 = compute_C2(a0bar, v0)
    a, v, C2, h0 = _col(a0bar), _col(v0), _col(C2), _col(h0)
    e = np.exp(-2.0 * h0 * np.asarray(Z))
    den = 1.0 - C2 * e
    if np.any(den <= 0):
        raise LayerError("1 - C2 exp(-2 h0 Z) must stay positive")
    S = np.sqrt((a ** 2 * (1.0 + C2 ** 2 * e ** 2) + 2.0 * C2 * (h0 ** 2 - v ** 2) * e) / den ** 2)
    return 4.0 * C2 * h0 ** 2 * e / (den ** 2 * (a + S))


def tail_integral(f, Z, rate=None) -> np.ndarray:
    """int_Z^{Z_max} f dZ' plus f(Z_max)/rate for the tail beyond.

    The quadrature is the antiderivative of a quintic interpolating spline,
    which is smooth in Z so that the result can be differenced again.
    """
    f = np.asarray(f, dtype=float)
    F = make_interp_spline(Z, f, k=5, axis=-1).antiderivative()(Z)
    out = F[..., -1:] - F
    if rate is not None:
        out = out + f[..., -1:] / _col(rate)
    return out


def dPhi1_profile(a0bar, v0, A0) -> np.ndarray:
    """d_Z Phi1 from the conservation law (A0 + abar0)^2 (d_Z Phi1 + v0) = abar0^2 v0."""
    a, v = _col(a0bar), _col(v0)
    return a ** 2 * v / (A0 + a) ** 2 - v


def profile_Phi1(a0bar, v0, A0, Z):
    """Phi1(Z) = v0 int_Z^inf A0 (A0 + 2 abar0) / (A0 + abar0)^2; returns (Phi1, d_Z Phi1).

    This is -int_Z^inf d_Z Phi1 with d_Z Phi1 taken from the conservation law.
    """
    a, v = _col(a0bar), _col(v0)
    if np.max(np.abs(A0[..., -1])) > 1e-6 * max(1.0, np.max(np.abs(A0))):
        raise LayerError("A0 does not decay on the Z-grid")
    _, h0 = compute_C2(a0bar, v0)
    integrand = A0 * (A0 + 2.0 * a) / (A0 + a) ** 2
    Phi1 = v * tail_integral(integrand, Z, rate=2.0 * h0)
    return Phi1, dPhi1_profile(a0bar, v0, A0)


def stiffness_g(a0bar, v0, A0, dPhi1) -> np.ndarray:
    a, v = _col(a0bar), _col(v0)
    return (6.0 * A0 ** 2 + 12.0 * a * A0 + 4.0 * a ** 2 + 2.0 * dPhi1 * v + dPhi1 ** 2
            - 4.0 * a ** 4 * v ** 2 / (A0 + a) ** 4)


@dataclass
class BVPResult:
    A: np.ndarray
    residual: float
    decay_constant: float


def _numerov_solve(g, s, h):
    """Solve u'' = g u + s with u = 0 at both ends (Numerov, tridiagonal)."""
    n = len(g)
    gi = g[1:-1]
    ab = np.zeros((3, n - 2))
    ab[0, 1:] = 1.0 / h ** 2 - g[2:-1] / 12.0
    ab[1, :] = -2.0 / h ** 2 - 10.0 * gi / 12.0
    ab[2, :-1] = 1.0 / h ** 2 - g[1:-2] / 12.0
    rhs = (s[:-2] + 10.0 * s[1:-1] + s[2:]) / 12.0
    u = np.zeros(n)
    u[1:-1] = solve_banded((1, 1), ab, rhs)
    return u


def solve_layer_bvp(g, Gt, abar, Z, check: bool = True) -> BVPResult:
    """Decaying solution of A'' = g A + Gt with A(0) = -abar.

    Uses the shift At = A + exp(-3Z) abar, which has a homogeneous boundary
    condition, and a compact fourth-order (Numerov) tridiagonal discretization
    with At(Z_max) = 0.
    """
    Z = np.asarray(Z, dtype=float)
    g2 = np.atleast_2d(np.broadcast_to(g, np.broadcast_shapes(np.shape(g), np.shape(Gt))))
    G2 = np.atleast_2d(np.broadcast_to(Gt, g2.shape))
    ab = np.broadcast_to(np.atleast_1d(np.asarray(abar, dtype=float)), g2.shape[:1])
    if np.min(g2) <= 2.0:
        raise LayerError(f"coercivity failure: min g = {np.min(g2):.4g} <= 2")
    h = Z[1] - Z[0]
    e3 = np.exp(-3.0 * Z)
    A = np.empty_like(g2)
    res = 0.0
    for i in range(g2.shape[0]):
        s = G2[i] + (9.0 - g2[i]) * e3 * ab[i]
        u = _numerov_solve(g2[i], s, h)
        if not np.all(np.isfinite(u)):
            raise LayerError("linear solve failed")
        A[i] = u - e3 * ab[i]
        lhs = (u[2:] - 2 * u[1:-1] + u[:-2]) / h ** 2
        f = g2[i] * u + s
        res = max(res, float(np.max(np.abs(lhs - (f[:-2] + 10 * f[1:-1] + f[2:]) / 12.0))))
    A = A.reshape(np.broadcast_shapes(np.shape(g), np.shape(Gt)))
    dec = decay_constant(A, Z)
    if check and not np.isfinite(dec):
        raise LayerError("layer profile does not decay")
    return BVPResult(A, res, dec)


def decay_constant(F, Z, gamma: float = 1.0) -> float:
    """Measured sup_Z exp(gamma Z) |F(Z)| (the weighted decay constant)."""
    return float(np.max(np.exp(gamma * np.asarray(Z)) * np.abs(F)))


def compute_Phi_kp2(A_kp1, F_k, a0bar, v0, A0, Z):
    """Phi_{k+2} and d_Z Phi_{k+2} from the integrated continuity balance.

    d_Z Phi = -2 abar0^2 v0 A_{k+1}/(A0+abar0)^3 - 2 (A0+abar0)^{-2} int_Z^inf (A0+abar0) F_k,
    then Phi(Z) = -int_Z^inf d_Z Phi. Also returns the inner integral.
    """
    a, v = _col(a0bar), _col(v0)
    w = A0 + a
    I = tail_integral(w * F_k, Z)
    dPhi = -2.0 * a ** 2 * v * A_kp1 / w ** 3 - 2.0 * I / w ** 2
    Phi = -tail_integral(dPhi, Z)
    return Phi, dPhi, I


# ---------------------------------------------------------------------------
# source sums
# ---------------------------------------------------------------------------

@dataclass
class LayerTraces:
    """Outer boundary traces at one time.

    ``a[l, j]``, ``phi[l, j]``, ``phi_t[l, j]`` hold d_z^j a_l, d_z^j phi_l and
    d_t d_z^j phi_l at z = 0, each an array over tangential nodes (length 1 in 1-D).
    ``dy`` is the tangential spacing, or None when there is no y-direction.
    """

    a: np.ndarray
    phi: np.ndarray
    phi_t: np.ndarray
    dy: float | None = None

    def _get(self, arr, name, l, j):
        if l >= arr.shape[0]:
            raise LayerError(f"missing hierarchy member {name}_{l}")
        if j >= arr.shape[1]:
            raise LayerError(f"insufficient trace order: need d_z^{j} {name}_{l}")
        return arr[l, j][:, None]


def _combos(n, total):
    return [c for c in itertools.product(range(total + 1), repeat=n) if sum(c) == total]


def source_terms(k: int, tr: LayerTraces, A, Phi, dA_dt, dPhi_dt, Z):
    """Return (F_k, G_k, Gt_k) on the Z-grid, shape (ny, nZ).

    ``A`` lists A_0..A_k, ``Phi`` lists Phi_0..Phi_{k+1} (Phi_0 is identically
    zero), ``dA_dt`` and ``dPhi_dt`` are their time derivatives (at least
    d_t A_k and d_t Phi_1..Phi_{k+1}). Every array has shape (ny, nZ).
    """
    if len(A) < k + 1 or len(Phi) < k + 2:
        raise LayerError(f"order {k} sources need A_0..A_{k} and Phi_0..Phi_{k + 1}")
    Z = np.asarray(Z, dtype=float)
    dZ = Z[1] - Z[0]
    ny = A[0].shape[0]
    zero = np.zeros((ny, Z.size))

    def a(l, j):
        return tr._get(tr.a, "a", l, j)

    def p(l, j):
        return tr._get(tr.phi, "phi", l, j)

    def pt(l, j):
        return tr._get(tr.phi_t, "phi_t", l, j)

    def Al(l):
        return A[l] if l < len(A) else zero

    def Pl(l):
        return Phi[l] if l < len(Phi) else zero

    def hy(u, n=1):
        if tr.dy is None or ny == 1:
            return np.zeros_like(u)
        return deriv_periodic(u, tr.dy, n, order=4, axis=0)

    def dz(u, n=1):
        return deriv(u, dZ, n, order=4, axis=-1)

    def lap_tr(l, j):
        return hy(p(l, j), 2) + p(l, j + 2)

    w = [Z ** j / factorial(j) for j in range(k + 4)]
    dA = [dz(Al(l)) for l in range(k + 2)]
    dP = [dz(Pl(l)) for l in range(k + 3)]
    d2P = [dz(Pl(l), 2) for l in range(k + 3)]

    # F_k: coefficient of eps^k in the continuity balance, minus principal part
    F = -dA_dt[k]
    for l in range(k + 1):
        m = k - l
        F = F - (hy(Pl(l)) * hy(Al(m)) + Al(l) / 2 * (hy(Pl(m), 2) + lap_tr(m, 0))
                 + hy(p(l, 0)) * hy(Al(m)) + hy(Pl(l)) * hy(a(m, 0)) + a(l, 0) / 2 * hy(Pl(m), 2)
                 + Z * (p(l, 2) * dA[m] + dP[l] * a(m, 2)))
    for l in range(2, k + 2):
        F = F - dP[l] * dA[k + 2 - l]
    for l in range(1, k + 1):
        F = F - (Al(l) + a(l, 0)) / 2 * d2P[k + 2 - l]
    F = F - a(k + 1, 0) / 2 * d2P[1]
    for l in range(1, k + 2):
        F = F - (p(l, 1) * dA[k + 1 - l] + dP[l] * a(k + 1 - l, 1) + Z * a(k + 1 - l, 1) / 2 * d2P[l])
    for l1 in range(k):
        l2 = k - 1 - l1
        F = F - Z * (hy(p(l1, 1)) * hy(Al(l2)) + hy(Pl(l1)) * hy(a(l2, 1))
                     + a(l1, 1) / 2 * hy(Pl(l2), 2) + Al(l1) / 2 * lap_tr(l2, 1))
    for j in range(2, k + 1):
        for l1 in range(k - j + 1):
            l2 = k - j - l1
            F = F - w[j] * (hy(p(l1, j)) * hy(Al(l2)) + hy(Pl(l1)) * hy(a(l2, j))
                            + a(l1, j) / 2 * hy(Pl(l2), 2) + Al(l1) / 2 * lap_tr(l2, j))
    for j in range(2, k + 2):
        for l1 in range(k + 2 - j):
            l2 = k + 1 - j - l1
            F = F - w[j] * (p(l1, j + 1) * dA[l2] + dP[l1] * a(l2, j + 1))
    for j in range(2, k + 3):
        for l1 in range(k + 3 - j):
            l2 = k + 2 - j - l1
            F = F - w[j] * a(l1, j) / 2 * d2P[l2]

    # G_k: coefficient of eps^(k+1) in the Bernoulli balance, minus principal part
    G = np.zeros_like(F)
    for l1, l2, j in _combos(3, k + 1):
        if l1 <= k:
            G = G + w[j] * (a(l1, j) * dPhi_dt[l2] + Al(l1) * pt(l2, j))
    for l in range(k + 1):
        G = G + Al(l) * dPhi_dt[k + 1 - l]
    for l1, l2, l3, j1, j2 in _combos(5, k + 1):
        wt = Z ** (j1 + j2) / (factorial(j1) * factorial(j2))
        G = G + wt * a(l1, j1) * hy(p(l2, j2)) * hy(Pl(l3))
        if l1 <= k:
            G = G + wt * Al(l1) * (0.5 * (hy(p(l2, j1)) * hy(p(l3, j2)) + p(l2, j1 + 1) * p(l3, j2 + 1))
                                   + 3.0 * a(l2, j1) * a(l3, j2))
    for l1, l2, l3, j1, j2 in _combos(5, k + 2):
        if 1 <= l3 <= k + 1:
            G = G + Z ** (j1 + j2) / (factorial(j1) * factorial(j2)) * a(l1, j1) * p(l2, j2 + 1) * dP[l3]
    for l1, l2, l3, j in _combos(4, k + 1):
        if l1 <= k:
            G = G + w[j] * Al(l1) * hy(p(l2, j)) * hy(Pl(l3))
        G = G + w[j] * a(l1, j) / 2 * hy(Pl(l2)) * hy(Pl(l3))
        if l2 <= k and l3 <= k:
            G = G + w[j] * 3.0 * a(l1, j) * Al(l2) * Al(l3)
    for l1, l2, l3, j in _combos(4, k + 2):
        if l1 <= k and 1 <= l3 <= k + 1:
            G = G + w[j] * Al(l1) * p(l2, j + 1) * dP[l3]
    for l1, l2, l3, j in _combos(4, k + 3):
        if 1 <= l2 <= k + 1 and 1 <= l3 <= k + 1:
            G = G + w[j] * a(l1, j) / 2 * dP[l2] * dP[l3]
    for l1, l2, l3 in _combos(3, k + 1):
        G = G + Al(l1) / 2 * hy(Pl(l2)) * hy(Pl(l3))
        if max(l1, l2, l3) <= k:
            G = G + Al(l1) * Al(l2) * Al(l3)
    for l1, l2, l3 in _combos(3, k + 3):
        if l1 <= k and 1 <= l2 <= k + 1 and 1 <= l3 <= k + 1:
            G = G + Al(l1) / 2 * dP[l2] * dP[l3]
    if k >= 1:
        G = G - 0.5 * hy(Al(k - 1), 2)

    a0, v0 = a(0, 0), p(0, 1)
    wgt = Al(0) + a0
    I = tail_integral(wgt * F, Z)
    Gt = 2.0 * G - 4.0 * a0 ** 2 * v0 * I / wgt ** 3
    return F, G, Gt


# ---------------------------------------------------------------------------
# profile container and export
# ---------------------------------------------------------------------------

@dataclass
class LayerProfile:
    """Layer profiles on one Z-grid: ``A[j]`` is A_j and ``Phi[j]`` is Phi_j (Phi[0] = 0)."""

    Z: np.ndarray
    A: list
    Phi: list
    gamma: float = 1.0
    meta: dict = field(default_factory=dict)

    def decay_constants(self) -> dict:
        out = {f"A{j}": decay_constant(x, self.Z, self.gamma) for j, x in enumerate(self.A)}
        out.update({f"Phi{j}": decay_constant(x, self.Z, self.gamma) for j, x in enumerate(self.Phi) if j})
        return out


def order0_profile(a0bar: float, v0: float, nZ: int = NZ_DEFAULT) -> LayerProfile:
    """Closed-form (A0, Phi1) for scalar inputs, with metadata."""
    inputs = LayerInputs(a0bar, v0)
    C2, h0 = compute_C2(inputs.a0bar, inputs.v0)
    Z = z_grid(h0, nZ)
    A0 = profile_A0(a0bar, v0, Z)
    Phi1, _ = profile_Phi1(a0bar, v0, A0, Z)
    tail = float(np.exp(-2.0 * h0 * Z[-1]))
    meta = {"a0bar": float(a0bar), "v0": float(v0), "h0": float(h0), "C2": float(C2),
            "gamma": 1.0, "tail_bound": tail}
    return LayerProfile(Z, [A0], [np.zeros_like(A0), Phi1], 1.0, meta)


def write_profile(prefix, Z, A, Phi, meta=None) -> None:
    """Write ``<prefix>.csv`` with columns Z,A,Phi and optional ``<prefix>.json`` metadata."""
    with open(f"{prefix}.csv", "w") as fh:
        fh.write("Z,A,Phi\n")
        for row in zip(Z, np.ravel(A), np.ravel(Phi)):
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
    if meta is not None:
        with open(f"{prefix}.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
