"""Uniform half-line grids, sampled fields, finite-difference stencils and norms.

Arrays follow one convention throughout the package: the normal coordinate z
is the last axis, and an optional periodic tangential coordinate y is the
axis just before it. A 1-D field has shape ``(nz,)``, a 2-D one ``(ny, nz)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import trapezoid


class GridError(ValueError):
    """Raised when a grid is too small for the requested stencil."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, z_max], optionally times a periodic y-interval.

    Node 0 sits at z = 0 and node nz-1 at z = z_max. The tangential period is
    y_max with ny equispaced nodes (the endpoint is not repeated).
    """

    z_max: float
    nz: int
    y_max: float | None = None
    ny: int | None = None

    def __post_init__(self):
        if not self.z_max > 0:
            raise GridError("z_max must be positive")
        if self.nz < 2:
            raise GridError("need at least two nodes in z")
        if (self.y_max is None) != (self.ny is None):
            raise GridError("y_max and ny must be given together")
        if self.ny is not None and (self.ny < 1 or not self.y_max > 0):
            raise GridError("tangential extent must be positive")

    @property
    def has_y(self) -> bool:
        return self.ny is not None

    @property
    def dz(self) -> float:
        return self.z_max / (self.nz - 1)

    @property
    def dy(self) -> float | None:
        return self.y_max / self.ny if self.has_y else None

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, self.z_max, self.nz)

    @property
    def y(self) -> np.ndarray | None:
        return np.arange(self.ny) * self.dy if self.has_y else None

    @property
    def shape(self) -> tuple:
        return (self.ny, self.nz) if self.has_y else (self.nz,)

    def mesh(self):
        """Return (Y, Zm) broadcastable coordinate arrays (Y is None in 1-D)."""
        if not self.has_y:
            return None, self.z
        return self.y[:, None] * np.ones((1, self.nz)), np.ones((self.ny, 1)) * self.z[None, :]

    def zeros(self, dtype=float) -> np.ndarray:
        return np.zeros(self.shape, dtype=dtype)

    def refined(self, factor: int = 2) -> "Grid":
        """Grid with dz divided by ``factor`` (tangential grid unchanged)."""
        return Grid(self.z_max, (self.nz - 1) * factor + 1, self.y_max, self.ny)


def _frozen(values, grid, dtype):
    arr = np.array(values, dtype=dtype)
    if arr.shape != grid.shape:
        raise ValueError(f"field shape {arr.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RealField:
    """Real samples on a grid; the value array is read-only."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid, float))


@dataclass(frozen=True)
class ComplexField:
    """Complex samples on a grid; the value array is read-only."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid, complex))


def _like(f, values):
    return type(f)(f.grid, values)


# ---------------------------------------------------------------------------
# finite-difference kernels on plain arrays
# ---------------------------------------------------------------------------

def fd_weights(x0: float, xs, m: int) -> np.ndarray:
    """Fornberg weights for the m-th derivative at x0 from nodes xs."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


@lru_cache(maxsize=None)
def _stencils(n: int, order: int):
    """Centered interior weights plus one-sided rows for the left boundary."""
    width = 2 * ((n + 1) // 2) - 1 + order
    r = width // 2
    centre = fd_weights(0.0, np.arange(-r, r + 1), n)
    nside = n + order
    side = [fd_weights(float(i), np.arange(nside), n) for i in range(r)]
    return r, centre, np.array(side)


def deriv(u, h: float, n: int = 1, order: int = 2, axis: int = -1) -> np.ndarray:
    """n-th derivative along a non-periodic axis with accuracy ``order``.

    Interior nodes use the centered stencil; the first and last few nodes use
    one-sided stencils of the same accuracy.
    """
    u = np.moveaxis(np.asarray(u), axis, -1)
    r, centre, side = _stencils(n, order)
    npts = u.shape[-1]
    if npts < max(2 * r + 1, side.shape[1]):
        raise GridError(f"need at least {max(2 * r + 1, side.shape[1])} nodes, got {npts}")
    out = np.empty(u.shape, dtype=np.result_type(u, float))
    acc = 0.0
    for w, s in zip(centre, range(-r, r + 1)):
        acc = acc + w * u[..., r + s:npts - r + s]
    out[..., r:npts - r] = acc
    m = side.shape[1]
    for i in range(r):
        out[..., i] = u[..., :m] @ side[i]
        out[..., npts - 1 - i] = (-1) ** n * (u[..., ::-1][..., :m] @ side[i])
    return np.moveaxis(out / h ** n, -1, axis)


def deriv_periodic(u, h: float, n: int = 1, order: int = 2, axis: int = -2) -> np.ndarray:
    """n-th derivative along a periodic axis (centered stencil)."""
    u = np.asarray(u)
    r, centre, _ = _stencils(n, order)
    out = 0.0
    for w, s in zip(centre, range(-r, r + 1)):
        if w != 0.0:
            out = out + w * np.roll(u, -s, axis=axis)
    return out / h ** n


def d_z(u, grid: Grid, n: int = 1, order: int = 2) -> np.ndarray:
    return deriv(u, grid.dz, n, order, axis=-1)


def d_y(u, grid: Grid, n: int = 1, order: int = 2) -> np.ndarray:
    """Tangential derivative; identically zero on a 1-D grid."""
    if not grid.has_y:
        return np.zeros_like(np.asarray(u))
    return deriv_periodic(u, grid.dy, n, order, axis=-2)


def lap(u, grid: Grid, order: int = 2) -> np.ndarray:
    out = d_z(u, grid, 2, order)
    if grid.has_y:
        out = out + d_y(u, grid, 2, order)
    return out


def grad_dot(u, v, grid: Grid, order: int = 2) -> np.ndarray:
    """Pointwise grad(u) . grad(v)."""
    out = d_z(u, grid, 1, order) * d_z(v, grid, 1, order)
    if grid.has_y:
        out = out + d_y(u, grid, 1, order) * d_y(v, grid, 1, order)
    return out


def div_coef_grad(q, u, grid: Grid, order: int = 2) -> np.ndarray:
    """div(q grad u)."""
    out = d_z(q * d_z(u, grid, 1, order), grid, 1, order)
    if grid.has_y:
        out = out + d_y(q * d_y(u, grid, 1, order), grid, 1, order)
    return out


# ---------------------------------------------------------------------------
# field-level operations
# ---------------------------------------------------------------------------

def _apply_bc(out, bc):
    if bc == "one-sided":
        return out
    out = np.array(out)
    out[..., 0] = 0.0
    out[..., -1] = 0.0
    return out


def laplacian(f, bc="one-sided", order: int = 2):
    """Discrete Laplacian of a field.

    ``bc="one-sided"`` evaluates boundary rows with one-sided stencils; any
    other value (e.g. ``"dirichlet"``) treats the boundary rows as prescribed
    data and returns zero there.
    """
    if f.grid.nz < 3:
        raise GridError("laplacian needs nz >= 3")
    return _like(f, _apply_bc(lap(f.values, f.grid, order), bc))


def gradient_z(f, order: int = 2):
    if f.grid.nz < 3:
        raise GridError("gradient needs nz >= 3")
    return _like(f, d_z(f.values, f.grid, 1, order))


def gradient_y(f, order: int = 2):
    return _like(f, d_y(f.values, f.grid, 1, order))


def divergence(fz, fy=None, order: int = 2):
    """div of the vector field (fy, fz); fy may be omitted on 1-D grids."""
    out = d_z(fz.values, fz.grid, 1, order)
    if fy is not None:
        out = out + d_y(fy.values, fy.grid, 1, order)
    return _like(fz, out)


@dataclass(frozen=True)
class TraceSeries:
    """Boundary traces: ``values[k, j]`` is the j-th z-derivative at z = 0 at time t[k].

    In 2-D each entry is an array over the tangential nodes.
    """

    t: np.ndarray
    values: np.ndarray
    order: int = 4

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        if np.any(np.diff(t) <= 0):
            raise ValueError("trace times must be strictly increasing")
        if self.values.shape[0] != t.size or self.values.ndim < 2:
            raise ValueError("values must be indexed as [time, derivative order, ...]")
        object.__setattr__(self, "t", t)

    @property
    def max_order(self) -> int:
        return self.values.shape[1] - 1


def trace_array(u, dz: float, J: int, order: int = 4) -> np.ndarray:
    """One-sided derivatives d^j u / dz^j at z = 0 for j = 0..J (stacked on axis 0 of the result)."""
    if J < 0 or J > 4:
        raise ValueError("trace order must satisfy 0 <= J <= 4")
    u = np.asarray(u)
    need = J + order
    if u.shape[-1] < need + 1:
        raise GridError(f"boundary_trace of order {J} needs at least {need + 1} nodes")
    rows = [u[..., 0]]
    for j in range(1, J + 1):
        w = fd_weights(0.0, np.arange(j + order), j)
        rows.append(u[..., :j + order] @ w / dz ** j)
    return np.stack(rows)


def boundary_trace(f, J: int, order: int = 4, t: float = 0.0) -> TraceSeries:
    """Trace record of a single field: value and z-derivatives at z = 0."""
    vals = trace_array(f.values, f.grid.dz, J, order)
    return TraceSeries(np.array([t]), vals[None], order)


def integrate(u, grid: Grid) -> float:
    """Trapezoidal rule in z, periodic rectangle rule in y."""
    val = trapezoid(u, dx=grid.dz, axis=-1)
    if grid.has_y:
        val = np.sum(val, axis=-1) * grid.dy
    return val


def norm_array(u, grid: Grid, kind: str = "L2", order: int = 2) -> float:
    if kind == "sup":
        return float(np.max(np.abs(u)))
    if kind == "L2":
        return float(np.sqrt(integrate(np.abs(u) ** 2, grid)))
    if kind == "H1":
        g2 = np.abs(d_z(u, grid, 1, order)) ** 2
        if grid.has_y:
            g2 = g2 + np.abs(d_y(u, grid, 1, order)) ** 2
        return float(np.sqrt(integrate(np.abs(u) ** 2 + g2, grid)))
    raise ValueError(f"unknown norm kind {kind!r}")


def norm(f, kind: str = "L2") -> float:
    """L2 (trapezoidal), sup (max modulus) or H1 (L2 plus gradient L2) norm."""
    return norm_array(f.values, f.grid, kind)


# ---------------------------------------------------------------------------
# snapshot I/O
# ---------------------------------------------------------------------------

def write_field_csv(path, f) -> None:
    """Write a field as CSV with header ``z[,y],re[,im]`` and 17 significant digits."""
    grid = f.grid
    cplx = isinstance(f, ComplexField) or np.iscomplexobj(f.values)
    header = ["z"] + (["y"] if grid.has_y else []) + ["re"] + (["im"] if cplx else [])
    Y, Zm = grid.mesh()
    cols = [Zm.ravel()] + ([Y.ravel()] if grid.has_y else [])
    vals = np.asarray(f.values).ravel()
    cols.append(vals.real)
    if cplx:
        cols.append(vals.imag)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([f"{x:.17g}" for x in row])


def read_field_csv(path, grid: Grid):
    """Read a snapshot written by :func:`write_field_csv` back onto ``grid``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    re = data[:, header.index("re")]
    if "im" in header:
        return ComplexField(grid, (re + 1j * data[:, header.index("im")]).reshape(grid.shape))
    return RealField(grid, re.reshape(grid.shape))
