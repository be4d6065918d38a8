"""End-to-end experiments: data, hierarchy, GP runs, error norms and slope fits."""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import stats

from . import gp as gpsolver
from .grid import Grid, deriv, deriv_periodic, integrate
from .hierarchy import Hierarchy, build_hierarchy
from .limit import CFL_MAX, solve_phi0
from .wkb import assemble_window, residuals

BUMP_POWER = 8
# derivative norms amplify round-off by 1/dz, so "round-off level" is well above machine epsilon
NOT_APPLICABLE_FLOOR = 1e-10
L2_TOL = 0.3
SUP_TOL = 0.4
NORM_KINDS = ("w_L2", "w_sup", "grad_w_sup", "w1inf", "wR_L2", "gp_res_L2")
SUP_KINDS = ("w_sup", "grad_w_sup", "w1inf")


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


class StageError(RuntimeError):
    """Failure inside a pipeline stage; the message is tagged with the stage name."""


@dataclass
class ScenarioConfig:
    """Scenario parameters; every field is a valid key of the ``key = value`` config file."""

    delta: float = 0.05
    z1: float = 1.0
    z2: float = 2.0
    z_max: float = 8.0
    T: float = 0.5
    m: int = 1
    eps: tuple = (0.2, 0.1, 0.05, 0.025)
    nz_outer: int = 3201
    dz_ratio: float = 16.0
    dt_factor: float = 1.0
    nZ: int = 4000
    y_max: float = 1.0
    ny: int = 0
    y_amp: float = 0.0
    out: str = "out"

    def __post_init__(self):
        self.eps = tuple(float(e) for e in self.eps)
        self.validate()

    def validate(self) -> None:
        if not 0.0 <= self.delta <= 0.2:
            raise ConfigError("delta must lie in [0, 0.2]")
        if not 0.0 < self.z1 < self.z2 < self.z_max:
            raise ConfigError("bump support must satisfy 0 < z1 < z2 < z_max")
        if self.z_max < self.z2 + 2.0 * self.T + 1.0:
            raise ConfigError("z_max must be at least z2 + 2T + 1")
        if self.T <= 0:
            raise ConfigError("T must be positive")
        if self.m not in (0, 1, 2):
            raise ConfigError("m must be 0, 1 or 2")
        if len(self.eps) < 1 or any(e <= 0 for e in self.eps):
            raise ConfigError("eps list must be nonempty and positive")
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError("eps list must be strictly decreasing")
        if self.dz_ratio < 16:
            raise ConfigError("dz_ratio must be >= 16 (dz <= eps/16)")
        if self.nz_outer < 11 or self.nZ < 10 or self.dt_factor <= 0:
            raise ConfigError("grid parameters out of range")
        if self.ny < 0 or self.ny == 1 or (self.ny and self.y_max <= 0):
            raise ConfigError("ny must be 0 (no y-direction) or >= 2 with y_max > 0")

    @property
    def outer_grid(self) -> Grid:
        return Grid(z_max=self.z_max, nz=self.nz_outer, **self._y())

    def _y(self):
        return {"y_max": self.y_max, "ny": self.ny} if self.ny else {}

    def gp_grid(self, eps: float) -> Grid:
        """GP grid with dz = z_max / ceil(z_max dz_ratio / eps) <= eps / dz_ratio."""
        n = int(np.ceil(self.z_max * self.dz_ratio / eps - 1e-9))
        return Grid(z_max=self.z_max, nz=n + 1, **self._y())

    @property
    def sample_times(self) -> tuple:
        return (0.5 * self.T, self.T)


_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _convert(key, raw):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "tuple":
            return tuple(float(x) for x in raw.replace(",", " ").split())
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str, **overrides) -> ScenarioConfig:
    """Parse a flat ``key = value`` file ('#' starts a comment); unknown keys are errors."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ScenarioConfig(**values)


def load_config(path=None, **overrides) -> ScenarioConfig:
    text = "" if path is None else open(path).read()
    return parse_config(text, **overrides)


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------

def _unit_bump(s):
    return np.where(np.abs(s) < 0.5, np.cos(np.pi * s) ** BUMP_POWER, 0.0)


def _bump_slope_max() -> float:
    s = np.linspace(-0.5, 0.5, 200001)
    return float(np.max(np.abs(np.gradient(_unit_bump(s), s))))


def bump(cfg: ScenarioConfig, grid: Grid) -> np.ndarray:
    """delta * b / max|b'| with b = cos^8 on [z1, z2] rescaled, optionally modulated in y."""
    width = cfg.z2 - cfg.z1
    s = (grid.z - 0.5 * (cfg.z1 + cfg.z2)) / width
    b = _unit_bump(s) * width / _bump_slope_max()
    if grid.has_y:
        b = b[None, :] * (1.0 + cfg.y_amp * np.cos(2.0 * np.pi * grid.y / grid.y_max))[:, None]
    return cfg.delta * b


def initial_data(cfg: ScenarioConfig, grid: Grid):
    """(a00, phi00) = (1 + bump, bump)."""
    b = bump(cfg, grid)
    return 1.0 + b, b


def data_size(cfg: ScenarioConfig) -> float:
    """sup of (a00 - 1, d_z phi00) on the outer grid."""
    g = cfg.outer_grid
    a00, p00 = initial_data(cfg, g)
    return float(max(np.max(np.abs(a00 - 1.0)), np.max(np.abs(deriv(p00, g.dz, 1, 4)))))


def build(cfg: ScenarioConfig, m: int | None = None) -> Hierarchy:
    """Limit solve plus hierarchy for order m (default cfg.m)."""
    m = cfg.m if m is None else m
    g = cfg.outer_grid
    a00, p00 = initial_data(cfg, g)
    # an even step count puts both sample times T/2 and T on the time grid
    h = min(g.dz, g.dy) if g.has_y else g.dz
    dt = cfg.T / (2 * int(np.ceil(0.5 * cfg.T / (CFL_MAX * h) - 1e-9)))
    try:
        traj = solve_phi0(a00, p00, cfg.T, g, dt=dt, extra_steps=3)
    except Exception as exc:
        raise StageError(f"[limit] {exc}") from exc
    try:
        return build_hierarchy(traj, m, cfg.nZ)
    except Exception as exc:
        raise StageError(f"[hierarchy] {exc}") from exc


# ---------------------------------------------------------------------------
# error quantities
# ---------------------------------------------------------------------------

def error_decomposition(psi, a, phi, eps: float):
    """(w, w_R, w_I) with w = exp(-i phi/eps) psi - a."""
    psi, a, phi = np.asarray(psi), np.asarray(a), np.asarray(phi)
    if psi.shape != a.shape or a.shape != phi.shape:
        raise ValueError("state and expansion must share the grid")
    w = np.exp(-1j * phi / eps) * psi - a
    return w, w.real, w.imag


def q_nonlinearity(w, a) -> np.ndarray:
    """Q(w) = a (w_R^2 + w_I^2) + w (w_R^2 + w_I^2 + 2 a w_R)."""
    w = np.asarray(w, dtype=complex)
    r2 = w.real ** 2 + w.imag ** 2
    return a * r2 + w * (r2 + 2.0 * a * w.real)


def error_norms(w, grid: Grid, order: int = 4) -> dict:
    """L2 and sup norms of w, sup of its gradient, their sum, and the L2 norm of w_R."""
    gz = deriv(w, grid.dz, 1, order, axis=-1)
    grad = np.abs(gz) ** 2
    if grid.has_y:
        grad = grad + np.abs(deriv_periodic(w, grid.dy, 1, order, axis=-2)) ** 2
    w_sup = float(np.max(np.abs(w)))
    g_sup = float(np.sqrt(np.max(grad)))
    return {"w_L2": float(np.sqrt(integrate(np.abs(w) ** 2, grid))), "w_sup": w_sup,
            "grad_w_sup": g_sup, "w1inf": w_sup + g_sup,
            "wR_L2": float(np.sqrt(integrate(w.real ** 2, grid)))}


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    residual: float
    ci95: tuple = (float("nan"), float("nan"))


def fit_slope(pairs) -> SlopeFit:
    """Least-squares slope of log10(value) against log10(eps) with a 95% interval."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("need at least two (eps, value) pairs")
    e = np.array([p[0] for p in pairs], dtype=float)
    v = np.array([p[1] for p in pairs], dtype=float)
    if np.any(v <= 0) or np.any(e <= 0):
        raise ValueError("slope fit needs positive eps and values")
    x, y = np.log10(e), np.log10(v)
    r = stats.linregress(x, y)
    res = float(np.sqrt(np.mean((y - (r.intercept + r.slope * x)) ** 2)))
    if len(pairs) > 2:
        half = float(stats.t.ppf(0.975, len(pairs) - 2) * r.stderr)
        ci = (float(r.slope) - half, float(r.slope) + half)
    else:
        ci = (float(r.slope), float(r.slope))
    return SlopeFit(float(r.slope), float(r.intercept), res, ci)


def targets(m: int) -> dict:
    return {"w_L2": m, "w_sup": m - 1, "grad_w_sup": m - 1, "w1inf": m - 1, "wR_L2": m + 1, "gp_res_L2": m + 1}


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def run_single(cfg: ScenarioConfig, H: Hierarchy, eps: float, m: int | None = None) -> dict:
    """Assemble, solve GP and measure errors at the sample times for one eps."""
    m = H.m if m is None else m
    grid = cfg.gp_grid(eps)
    a00, p00 = initial_data(cfg, grid)
    times = cfg.sample_times
    try:
        psi0 = a00 * np.exp(1j * p00 / eps)
        traj = gpsolver.solve(psi0, cfg.T, eps, grid, dt=cfg.dt_factor * gpsolver.default_dt(eps, grid),
                              save_times=times)
    except Exception as exc:
        raise StageError(f"[gp eps={eps}] {exc}") from exc
    rows, extra = [], {}
    for t in times:
        try:
            E = assemble_window(H, eps, grid, t, m)
            R = residuals(E)
        except Exception as exc:
            raise StageError(f"[wkb eps={eps} t={t}] {exc}") from exc
        w, _, _ = error_decomposition(traj.at(t), E.a[2], E.phi[2], eps)
        norms = error_norms(w, grid)
        norms["gp_res_L2"] = R.norms["gp_L2"]
        for kind in NORM_KINDS:
            rows.append((eps, kind, t, norms[kind]))
        extra[repr(float(t))] = {"identity_error": R.identity_error, "stencil_tolerance": R.stencil_tolerance,
                              "w_boundary": float(np.max(np.abs(w[..., 0]))),
                              "Q_L2": float(np.sqrt(integrate(np.abs(q_nonlinearity(w, E.a[2])) ** 2, grid))),
                              "R_a_L2": R.norms["R_a_L2"], "R_phi_L2": R.norms["R_phi_L2"]}
    return {"eps": eps, "rows": rows, "gp": traj.meta, "diagnostics": extra}


def _worker(args):
    cfg, H, eps, m = args
    return run_single(cfg, H, eps, m)


@dataclass
class ConvergenceReport:
    m: int
    eps: tuple
    rows: list
    slopes: dict
    targets: dict
    passed: dict
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"m": self.m, "eps": list(self.eps), "slopes": self.slopes, "targets": self.targets,
                "pass": self.passed, "meta": self.meta}


def summarize(rows, m: int) -> tuple:
    """Slopes (max over sample times per eps), targets and pass flags."""
    eps = sorted({r[0] for r in rows}, reverse=True)
    tg = targets(m)
    slopes, passed = {}, {}
    for kind in NORM_KINDS:
        vals = [max(r[3] for r in rows if r[0] == e and r[1] == kind) for e in eps]
        if len(eps) < 2 or max(vals) < NOT_APPLICABLE_FLOOR or min(vals) <= 0:
            slopes[kind] = None
            passed[kind] = None
            continue
        fit = fit_slope(zip(eps, vals))
        slopes[kind] = asdict(fit)
        tol = SUP_TOL if kind in SUP_KINDS else L2_TOL
        passed[kind] = bool(fit.slope >= tg[kind] - tol)
    return slopes, tg, passed


def run_convergence(cfg: ScenarioConfig, jobs: int = 1, m: int | None = None,
                    hierarchy: Hierarchy | None = None) -> ConvergenceReport:
    """Build the hierarchy once, then run every eps (in parallel when jobs > 1)."""
    m = cfg.m if m is None else m
    H = build(cfg, m) if hierarchy is None else hierarchy
    Hs = H.restrict(cfg.sample_times)
    tasks = [(cfg, Hs, e, m) for e in cfg.eps]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_worker, tasks))
    else:
        results = [_worker(t) for t in tasks]
    rows = [r for res in results for r in res["rows"]]
    slopes, tg, passed = summarize(rows, m)
    meta = {"config": _config_dict(cfg), "data_size": data_size(cfg), "hierarchy": _jsonable(H.meta),
            "runs": {repr(float(res['eps'])): {"gp": res["gp"], "diagnostics": res["diagnostics"]}
                     for res in results}}
    return ConvergenceReport(m, cfg.eps, rows, slopes, tg, passed, meta)


def _config_dict(cfg):
    d = asdict(cfg)
    d["eps"] = list(cfg.eps)
    return d


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def write_errors_csv(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write("eps,norm_kind,t,value\n")
        for eps, kind, t, v in rows:
            # repr is the shortest exact round-trip form, hence deterministic
            fh.write(f"{float(eps)!r},{kind},{float(t)!r},{float(v)!r}\n")


def read_errors_csv(path) -> list:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "eps,norm_kind,t,value":
            raise ValueError(f"unexpected header {header!r}")
        for line in fh:
            e, k, t, v = line.strip().split(",")
            rows.append((float(e), k, float(t), float(v)))
    return rows


def write_slope_files(outdir, rows) -> list:
    """One ``slope_<norm>.dat`` per norm kind: log10 eps, log10 value (max over sample times)."""
    paths = []
    eps = sorted({r[0] for r in rows}, reverse=True)
    for kind in NORM_KINDS:
        vals = [max(r[3] for r in rows if r[0] == e and r[1] == kind) for e in eps]
        path = os.path.join(outdir, f"slope_{kind}.dat")
        with open(path, "w") as fh:
            for e, v in zip(eps, vals):
                lv = np.log10(v) if v > 0 else float("-inf")
                fh.write(f"{float(np.log10(e))!r} {float(lv)!r}\n")
        paths.append(path)
    return paths


def write_report(outdir, report: ConvergenceReport) -> None:
    os.makedirs(outdir, exist_ok=True)
    write_errors_csv(os.path.join(outdir, "errors.csv"), report.rows)
    write_slope_files(outdir, report.rows)
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(_jsonable(report.to_json()), fh, indent=2, sort_keys=True)
