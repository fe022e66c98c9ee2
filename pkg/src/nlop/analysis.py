"""Free boundary diagnostics: geometry, u/d^s trace, blow-ups, flatness, exponents."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial import cKDTree

from .energy import Field, Grid
from .halfspace import HalfSpaceProfile, tail
from .kernel import KernelSpec, eval_kernel, free_boundary_constant_A

__all__ = [
    "FreeBoundaryGeometry",
    "FlatnessReport",
    "InsufficientResolution",
    "extract_boundary",
    "trace_u_over_ds",
    "blowup",
    "measure_flatness",
    "best_direction",
    "domain_variation",
    "density_ratio",
    "growth_exponents",
    "GrowthFit",
    "translation_monotonicity_product",
    "flatness_report",
    "profile_distance",
    "best_profile_fit",
    "nearest_boundary_point",
    "log_cutoff",
    "inverse_deformation",
    "monotonicity_excess",
    "ExcessScaling",
]


class InsufficientResolution(ValueError):
    pass


@dataclass
class FreeBoundaryGeometry:
    boundary_cells: np.ndarray  # (k, 2, n) integer node pairs (positive node, zero node)
    points: np.ndarray  # (k, n) sub-cell boundary locations
    normals: np.ndarray  # (k, n) unit normals pointing into {u > 0}
    distance_field: np.ndarray  # grid array, distance to the boundary at positive nodes, nan elsewhere
    graph_fit: dict | None = None
    empty: bool = False

    def to_dict(self) -> dict:
        return {
            "empty": self.empty,
            "points": self.points.tolist(),
            "normals": self.normals.tolist(),
            "graph_fit": self.graph_fit,
        }


def _edges(pos: np.ndarray):
    """Axis edges whose endpoints differ in sign: (positive index, zero index)."""
    out = []
    for ax in range(pos.ndim):
        a = [slice(None)] * pos.ndim
        b = [slice(None)] * pos.ndim
        a[ax], b[ax] = slice(0, -1), slice(1, None)
        pa, pb = pos[tuple(a)], pos[tuple(b)]
        for first_pos in (True, False):
            hit = np.argwhere(pa & ~pb) if first_pos else np.argwhere(~pa & pb)
            step = np.zeros(pos.ndim, dtype=int)
            step[ax] = 1
            lo, hi = hit, hit + step
            out.append((lo, hi) if first_pos else (hi, lo))
    p = np.concatenate([o[0] for o in out]) if out else np.empty((0, pos.ndim), int)
    z = np.concatenate([o[1] for o in out]) if out else np.empty((0, pos.ndim), int)
    return p, z


def _subcell(u: Field, p: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Boundary location on each edge from linear extrapolation of u^{1/s} inward."""
    vals, s, h = u.values, u.s, u.grid.h
    x = u.grid.points()
    pp = 2 * p - z  # next node further into the positive side
    shape = np.asarray(vals.shape)
    ok = np.all((pp >= 0) & (pp < shape), axis=1)
    w0 = vals[tuple(p.T)] ** (1 / s)
    w1 = np.zeros_like(w0)
    w1[ok] = np.maximum(vals[tuple(pp[ok].T)], 0.0) ** (1 / s)
    frac = np.full(len(p), 0.5)
    good = ok & (w1 > w0)
    frac[good] = np.clip(w0[good] / (w1[good] - w0[good]), 0.0, 1.0)
    xp, xz = x[tuple(p.T)], x[tuple(z.T)]
    return xp + frac[:, None] * (xz - xp)


def _tls_normals(points: np.ndarray, toward: np.ndarray, k: int = 5) -> np.ndarray:
    n = points.shape[1]
    if n == 1:
        return np.sign(toward[:, :1]) * np.ones((len(points), 1))
    tree = cKDTree(points)
    _, idx = tree.query(points, k=min(k, len(points)))
    idx = np.atleast_2d(idx)
    out = np.empty_like(points)
    for i, nb in enumerate(idx):
        q = points[nb] - points[nb].mean(axis=0)
        _, _, vt = np.linalg.svd(q, full_matrices=True)
        nrm = vt[-1]
        if np.dot(nrm, toward[i]) < 0:
            nrm = -nrm
        out[i] = nrm
    return out


def extract_boundary(u: Field, k: int = 5) -> FreeBoundaryGeometry:
    pos = u.values > 0
    grid = u.grid
    if pos.all() or not pos.any():
        return FreeBoundaryGeometry(np.empty((0, 2, grid.n), int), np.empty((0, grid.n)), np.empty((0, grid.n)),
                                    np.full(grid.shape, np.nan), None, True)
    p, z = _edges(pos)
    pts = _subcell(u, p, z)
    x = grid.points()
    normals = _tls_normals(pts, x[tuple(p.T)] - x[tuple(z.T)], k)
    dist = np.full(grid.shape, np.nan)
    tree = cKDTree(pts)
    d, _ = tree.query(x[pos])
    dist[pos] = d
    fit = None
    if grid.n == 2 and len(pts) >= 3:
        nu = normals.mean(axis=0)
        nu /= np.linalg.norm(nu)
        tau = np.array([-nu[1], nu[0]])
        a, b = pts @ tau, pts @ nu
        coef = np.polyfit(a, b, 1)
        resid = float(np.sqrt(np.mean((np.polyval(coef, a) - b) ** 2)))
        fit = {"direction": nu.tolist(), "offset": float(coef[1]), "slope": float(coef[0]), "residual": resid}
    cells = np.stack([p, z], axis=1)
    return FreeBoundaryGeometry(cells, pts, normals, dist, fit, False)


def nearest_boundary_point(geo: FreeBoundaryGeometry, x) -> tuple[np.ndarray, np.ndarray]:
    if geo.empty:
        raise ValueError("empty free boundary")
    i = int(np.argmin(np.linalg.norm(geo.points - np.asarray(x, dtype=float), axis=1)))
    return geo.points[i], geo.normals[i]


def trace_u_over_ds(u: Field, geo: FreeBoundaryGeometry, x0, steps=(2, 4, 8)) -> float:
    """Limit of u/d^s along the inward normal at a boundary point.

    Samples q(t) = u(x0 + t nu)/t^s at t = 2h, 4h, 8h.  The leading error of
    q is a boundary offset, q ~ A (1 + s*eta/t), so the extrapolation removes
    a t^{-1} term using the two coarser samples; the finest one only has to be
    positive.
    """
    x0, nu = nearest_boundary_point(geo, x0)
    h, s = u.grid.h, u.s
    ts = h * np.asarray(steps, dtype=float)
    pts = x0 + ts[:, None] * nu
    lo, hi = np.asarray(u.grid.lo), np.asarray(u.grid.hi)
    inside = np.all((pts >= lo) & (pts <= hi), axis=1)
    vals = u.evaluate(pts) if inside.all() else None
    if vals is None or np.count_nonzero(vals > 0) < 3:
        raise InsufficientResolution("fewer than three valid inward samples")
    q = vals / ts**s
    # q(t) = A + c/t  ->  A = (t2 q2 - t1 q1) / (t2 - t1)
    est = [(ts[j + 1] * q[j + 1] - ts[j] * q[j]) / (ts[j + 1] - ts[j]) for j in range(len(ts) - 1)]
    return float(est[-1])


# -- blow-ups ------------------------------------------------------------------

class BoundarySampler:
    """Evaluates a field with the free boundary placed at its sub-cell location.

    Plain multilinear interpolation of u is positive on every cell touching
    {u > 0}, which fattens the support by up to a cell.  Instead interpolate
    phi = u^{1/s} on {u > 0}, extended to zero nodes by -c*d with d the
    distance to the tangent line of the nearest boundary point and c the
    local normal slope of phi, and return (phi_+)^s.  phi is linear across a
    flat boundary, so half-space profiles are reproduced exactly.
    """

    def __init__(self, u: Field, geo: FreeBoundaryGeometry | None = None):
        self.u, self.s = u, u.s
        geo = geo if geo is not None else extract_boundary(u)
        vals = u.values
        phi = np.maximum(vals, 0.0) ** (1 / u.s)
        if not geo.empty:
            x = u.grid.points()
            p = geo.boundary_cells[:, 0]
            # normal distances, exact for a flat boundary
            dp = np.sum((x[tuple(p.T)] - geo.points) * geo.normals, axis=1)
            slope = np.where(dp > 1e-3 * u.grid.h, phi[tuple(p.T)] / np.maximum(dp, 1e-300), np.nan)
            fill = np.nanmedian(slope) if np.isfinite(slope).any() else 1.0
            slope = np.where(np.isfinite(slope), slope, fill)
            zero = vals <= 0
            tree = cKDTree(geo.points)
            de, idx = tree.query(x[zero])
            dn = np.sum((geo.points[idx] - x[zero]) * geo.normals[idx], axis=1)
            d = np.where(dn >= 0.5 * de, dn, de)
            phi[zero] = -slope[idx] * d
        self._interp = RegularGridInterpolator(u.grid.axes(), phi, method="linear")
        self.lo, self.hi = np.asarray(u.grid.lo), np.asarray(u.grid.hi)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        x = x.reshape(-1, self.u.n)
        inside = np.all((x >= self.lo) & (x <= self.hi), axis=1)
        out = np.empty(len(x))
        if inside.any():
            out[inside] = np.maximum(self._interp(x[inside]), 0.0) ** self.s
        if (~inside).any():
            out[~inside] = self.u.exterior(x[~inside])
        return out.reshape(shape)


@dataclass(frozen=True, eq=False)
class RescaledExterior:
    """y -> u(x0 + r y) / r^s, evaluating the base field (grid or its own exterior)."""

    base: Field
    x0: tuple
    r: float
    sampler: object = None

    def __call__(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        f = self.sampler if self.sampler is not None else self.base.evaluate
        return f(np.asarray(self.x0) + self.r * y) / self.r**self.base.s

    def asymptotic(self, theta) -> np.ndarray:
        return self.base.exterior.asymptotic(theta)

    def breakpoints(self, origins, theta) -> np.ndarray:
        bp = self.base.exterior.breakpoints(np.asarray(self.x0) + self.r * origins, theta)
        return bp / self.r

    def to_dict(self) -> dict:
        return {"type": "blowup", "x0": list(self.x0), "r": self.r, "base": self.base.exterior.to_dict()}


def blowup(u: Field, x0, r: float, nodes: int = 129, sampler=None) -> Field:
    """u_{r,x0}(x) = u(x0 + r x)/r^s resampled on the unit box."""
    if r <= 0:
        raise ValueError("blow-up scale must be positive")
    x0 = np.asarray(x0, dtype=float).ravel()
    lo, hi = np.asarray(u.grid.lo), np.asarray(u.grid.hi)
    if np.any(x0 - r < lo - 1e-12) or np.any(x0 + r > hi + 1e-12):
        raise ValueError(f"blow-up box of radius {r} at {x0.tolist()} leaves the grid")
    n = u.n
    g = Grid((-1.0,) * n, (1.0,) * n, (nodes,) * n)
    sampler = sampler if sampler is not None else BoundarySampler(u)
    vals = sampler(x0 + r * g.points()) / r**u.s
    ext = RescaledExterior(u, tuple(x0), float(r), sampler)
    return Field(g, vals, ((-1.0,) * n, (1.0,) * n), ext, u.s)


# -- flatness ------------------------------------------------------------------

def _unit_ball_nodes(u: Field):
    x = u.grid.points()
    inb = np.linalg.norm(x, axis=-1) <= 1.0 + 1e-12
    return x[inb], u.values[inb]


def _amp(spec_or_A, nu) -> float:
    if isinstance(spec_or_A, KernelSpec):
        return _cached_A(spec_or_A, tuple(np.round(nu, 15)))
    return float(spec_or_A)


_A_CACHE: dict = {}


def _cached_A(spec: KernelSpec, nu: tuple) -> float:
    key = (id(spec), nu)
    if key not in _A_CACHE:
        if len(_A_CACHE) > 4096:
            _A_CACHE.clear()
        _A_CACHE[key] = free_boundary_constant_A(spec, np.asarray(nu))
    return _A_CACHE[key]


def measure_flatness(u_r: Field, nu, spec_or_A, tail_angles: int = 128, with_tail: bool = True):
    """(eps, T_eps) for the sandwich A(x.nu - eps)_+^s <= u <= A(x.nu + eps)_+^s on B_1.

    The smallest admissible shift is computed in closed form from the samples:
    for u > 0 it is |x.nu - (u/A)^{1/s}|, for u = 0 it is (x.nu)_+.
    """
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    A = _amp(spec_or_A, nu)
    s = u_r.s
    x, v = _unit_ball_nodes(u_r)
    xn = x @ nu
    pos = v > 0
    need = np.where(pos, np.abs(xn - (np.maximum(v, 0) / A) ** (1 / s)), np.maximum(xn, 0.0))
    eps = float(min(need.max(), 1.0))
    if not with_tail:
        return eps, float("nan")
    lower = HalfSpaceProfile(tuple(nu), -eps, A, s)
    upper = HalfSpaceProfile(tuple(nu), eps, A, s)
    n = u_r.n
    t_lo = tail(lambda y: np.minimum(u_r.evaluate(y) - lower(y), 0.0), 1.0, np.zeros(n), s=s, n_angles=tail_angles,
                per_decade=16)
    t_hi = tail(lambda y: np.maximum(u_r.evaluate(y) - upper(y), 0.0), 1.0, np.zeros(n), s=s, n_angles=tail_angles,
                per_decade=16)
    return eps, float(t_lo + t_hi)


def best_direction(u_r: Field, nu0, spec_or_A, width: float = 0.4, xtol: float = 1e-6) -> np.ndarray:
    """Direction minimizing the flatness eps near nu0 (bounded scalar search over the angle)."""
    nu0 = np.asarray(nu0, dtype=float)
    nu0 = nu0 / np.linalg.norm(nu0)
    if u_r.n == 1:
        return nu0
    phi0 = math.atan2(nu0[1], nu0[0])
    f = lambda phi: measure_flatness(u_r, [math.cos(phi), math.sin(phi)], spec_or_A, with_tail=False)[0]
    # coarse scan first: eps(phi) is a max of kinked functions
    grid = phi0 + np.linspace(-width, width, 41)
    vals = [f(p) for p in grid]
    j = int(np.argmin(vals))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": xtol})
    best = res.x if res.fun < f(phi0) else phi0
    return np.array([math.cos(best), math.sin(best)])


def profile_distance(u_r: Field, nu, spec_or_A, shift: float = 0.0) -> float:
    """sup over B_1 of |u_r - A(x.nu + shift)_+^s|."""
    nu = np.asarray(nu, dtype=float)
    A = _amp(spec_or_A, nu / np.linalg.norm(nu))
    x, v = _unit_ball_nodes(u_r)
    return float(np.max(np.abs(v - A * np.maximum(x @ nu + shift, 0.0) ** u_r.s)))


def best_profile_fit(u_r: Field, nu0, spec_or_A, n_scan: int = 41) -> tuple[np.ndarray, float, float]:
    """(nu, shift, sup-distance) of the half-space profile closest to u_r in sup norm on B_1.

    Starts from the flattest direction and a shift scan over [-eps, eps], then refines
    the direction angle and shift jointly (n = 2) or the shift alone.
    """
    nu = best_direction(u_r, nu0, spec_or_A)
    eps = measure_flatness(u_r, nu, spec_or_A, with_tail=False)[0]
    w = max(eps, 2 * u_r.grid.h)
    cs = np.linspace(-w, w, n_scan)
    ds = [profile_distance(u_r, nu, spec_or_A, c) for c in cs]
    c0 = float(cs[int(np.argmin(ds))])
    best = (nu, c0, float(min(ds)))
    if u_r.n == 2:
        f = lambda p: profile_distance(u_r, [math.cos(p[0]), math.sin(p[0])], spec_or_A, p[1])
        phi0 = math.atan2(nu[1], nu[0])
        res = optimize.minimize(f, [phi0, c0], method="Nelder-Mead",
                                options={"xatol": 1e-7, "fatol": 1e-12, "initial_simplex":
                                         [[phi0, c0], [phi0 + 0.02, c0], [phi0, c0 + 0.5 * w / n_scan * 4]]})
        if res.fun < best[2]:
            best = (np.array([math.cos(res.x[0]), math.sin(res.x[0])]), float(res.x[1]), float(res.fun))
    else:
        step = 2 * w / (n_scan - 1)
        res = optimize.minimize_scalar(lambda c: profile_distance(u_r, nu, spec_or_A, c),
                                       bounds=(c0 - step, c0 + step), method="bounded", options={"xatol": 1e-9})
        if res.fun < best[2]:
            best = (nu, float(res.x), float(res.fun))
    return best


def domain_variation(u: Field, nu, eps: float, x, spec_or_A, n_scan: int = 256) -> np.ndarray:
    """All w in [-1, 1] with A (x.nu)_+^s = u(x - eps nu w); empty means the data are not eps-flat here."""
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    x = np.asarray(x, dtype=float)
    if x @ nu < 0:
        raise ValueError("domain variation needs x.nu >= 0")
    A = _amp(spec_or_A, nu)
    target = A * max(float(x @ nu), 0.0) ** u.s
    f = lambda w: float(u.evaluate((x - eps * nu * w)[None])[0]) - target
    ws = np.linspace(-1.0, 1.0, n_scan + 1)
    fs = np.asarray(u.evaluate(x[None, :] - eps * ws[:, None] * nu[None, :])) - target
    roots = []
    for i in range(n_scan):
        a, b = fs[i], fs[i + 1]
        if a == 0.0:
            roots.append(ws[i])
        elif a * b < 0:
            roots.append(optimize.brentq(f, ws[i], ws[i + 1], xtol=1e-14))
    if fs[-1] == 0.0:
        roots.append(ws[-1])
    return np.unique(np.round(np.asarray(roots, dtype=float), 12))


def _ball_nodes(u: Field, x0, R):
    x0 = np.asarray(x0, dtype=float)
    lo, hi = np.asarray(u.grid.lo), np.asarray(u.grid.hi)
    if np.any(x0 - R < lo - 1e-12) or np.any(x0 + R > hi + 1e-12):
        raise ValueError(f"ball of radius {R} leaves the grid")
    inb = np.linalg.norm(u.grid.points() - x0, axis=-1) <= R
    return inb


def density_ratio(u: Field, x0, R: float) -> float:
    inb = _ball_nodes(u, x0, R)
    return float(np.count_nonzero(u.values[inb] > 0) / np.count_nonzero(inb))


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    residual: float
    radii: tuple
    sups: tuple
    degenerate: bool = False


def growth_exponents(u: Field, x0, radii) -> GrowthFit:
    """Least-squares slope of log sup_{B_r(x0)} u against log r."""
    radii = tuple(float(r) for r in radii)
    if len(radii) < 4:
        raise ValueError("need at least four radii")
    sups = tuple(float(u.values[_ball_nodes(u, x0, r)].max()) for r in radii)
    if min(sups) <= 0:
        return GrowthFit(float("nan"), float("nan"), radii, sups, True)
    lr, ls = np.log(radii), np.log(sups)
    coef, res, *_ = np.polyfit(lr, ls, 1, full=True)
    resid = float(np.sqrt(res[0] / len(radii))) if len(res) else 0.0
    return GrowthFit(float(coef[0]), resid, radii, sups)


def translation_monotonicity_product(u: Field, nu, t: float, ball) -> tuple[float, float]:
    """(int_ball (u - u(. + t nu))_+ / t, int_ball (u - u(. + t nu))_- / t)."""
    if t == 0:
        raise ValueError("translation must be nonzero")
    center, radius = ball
    inb = _ball_nodes(u, center, radius)
    x = u.grid.points()[inb]
    nu = np.asarray(nu, dtype=float)
    d = (u.values[inb] - u.evaluate(x + t * nu)) / t
    hn = u.grid.h**u.n
    return float(hn * np.sum(np.maximum(d, 0.0))), float(hn * np.sum(np.maximum(-d, 0.0)))


# -- scale sequence ------------------------------------------------------------

@dataclass
class FlatnessReport:
    scales: list
    epsilons: list
    tails: list
    nus: list
    trace_values: list = field(default_factory=list)
    exponents: dict = field(default_factory=dict)
    noise_floor: float = 0.0

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.scales, self.scales[1:])):
            raise ValueError("scales must be strictly decreasing")

    def to_dict(self) -> dict:
        return {
            "scales": self.scales,
            "epsilons": self.epsilons,
            "tails": self.tails,
            "nus": [list(map(float, v)) for v in self.nus],
            "trace_values": self.trace_values,
            "exponents": self.exponents,
            "noise_floor": self.noise_floor,
        }


def flatness_report(spec: KernelSpec, u: Field, x0, nu0, scales, nodes: int = 129) -> FlatnessReport:
    """Blow up at each scale, fit the best direction, record eps and T_eps."""
    eps, tails, nus = [], [], []
    nu = np.asarray(nu0, dtype=float)
    sampler = BoundarySampler(u)
    for r in scales:
        ur = blowup(u, x0, r, nodes, sampler)
        nu = best_direction(ur, nu, spec)
        e, T = measure_flatness(ur, nu, spec)
        eps.append(e)
        tails.append(T)
        nus.append(nu.copy())
    rep = FlatnessReport(list(map(float, scales)), eps, tails, nus, noise_floor=u.grid.h**u.s)
    pos = [(r, e) for r, e in zip(scales, eps) if e > 0]
    if len(pos) >= 2:
        rep.exponents["flatness_decay"] = float(np.polyfit(np.log([p[0] for p in pos]), np.log([p[1] for p in pos]), 1)[0])
    return rep


# ---------------------------------------------------------------------------
# energy excess of the logarithmic inner variation

def log_cutoff(x, R: float) -> np.ndarray:
    """1 on B_sqrt(R), 2(1 - log|x|/log R) on the annulus, 0 outside B_R."""
    r = np.linalg.norm(np.atleast_2d(x), axis=-1)
    with np.errstate(divide="ignore"):
        mid = 2.0 * (1.0 - np.log(np.maximum(r, 1e-300)) / math.log(R))
    return np.where(r <= math.sqrt(R), 1.0, np.where(r >= R, 0.0, mid))


def _log_cutoff_grad(x, R: float) -> np.ndarray:
    r2 = np.sum(x * x, axis=-1)
    r = np.sqrt(r2)
    ring = (r > math.sqrt(R)) & (r < R)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = -2.0 / math.log(R) * x / r2[:, None]
    return np.where(ring[:, None], g, 0.0)


def inverse_deformation(x, R: float, nu, t: float, tol: float = 1e-15, max_iter: int = 500) -> np.ndarray:
    """Solve y + t*phi_R(y)*nu = x by fixed-point iteration (a contraction for |t| < log R)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    nu = np.asarray(nu, dtype=float)
    y = x.copy()
    for _ in range(max_iter):
        yn = x - t * log_cutoff(y, R)[:, None] * nu
        if np.max(np.abs(yn - y)) < tol:
            return yn
        y = yn
    raise RuntimeError("fixed-point iteration for the inverse deformation did not converge")


@dataclass
class ExcessScaling:
    ts: np.ndarray
    excess: np.ndarray  # interaction excess I(u_t) + I(u_-t) - 2 I(u)
    volume_excess: np.ndarray
    slope: float

    def to_dict(self) -> dict:
        return {"ts": self.ts.tolist(), "excess": self.excess.tolist(),
                "volume_excess": self.volume_excess.tolist(), "slope": self.slope}


def monotonicity_excess(spec: KernelSpec, u, R: float, nu, ts, half_width: float | None = None,
                        nodes: int = 161, chunk: int = 256) -> ExcessScaling:
    """Second difference in t of the energy of u(Psi_t^{-1} x), Psi_t(x) = x + t phi_R(x) nu.

    Computed after the change of variables x -> Psi_t(x): u stays on the grid nodes and the
    kernel is deformed, K(Psi_t x - Psi_t y) J_t(x) J_t(y) with J_t = 1 + t nu.grad(phi_R).
    Only pairs with a node in B_R contribute.  The grid box [-half_width, half_width]^n
    truncates the outer variable.
    """
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    n = spec.n
    half_width = 2.0 * R if half_width is None else half_width
    grid = Grid.cube(half_width, nodes, n)
    X = grid.points().reshape(-1, n)
    hn = grid.h**n
    vals = np.asarray(u(X), dtype=float)
    inside = np.linalg.norm(X, axis=1) < R
    rows = np.flatnonzero(inside)
    colw = np.where(inside, 1.0, 2.0)  # pairs (in, out) appear twice among ordered pairs
    phi = log_cutoff(X, R)
    dphi = _log_cutoff_grad(X, R) @ nu

    ts = np.asarray(ts, dtype=float)
    excess, vol = [], []
    pos = vals > 0
    for t in ts:
        Yp, Ym = X + t * phi[:, None] * nu, X - t * phi[:, None] * nu
        Jp, Jm = 1.0 + t * dphi, 1.0 - t * dphi
        parts = []
        for k in range(0, len(rows), chunk):
            i = rows[k:k + chunk]
            du2 = (vals[i, None] - vals[None, :]) ** 2 * colw[None, :]
            same = i[:, None] == np.arange(len(X))[None, :]
            e = np.zeros(du2.shape)
            for Y, J, c in ((Yp, Jp, 1.0), (Ym, Jm, 1.0), (X, np.ones(len(X)), -2.0)):
                d = (Y[i, None, :] - Y[None, :, :]).reshape(-1, n)
                d[same.ravel()] = 1.0  # masked below
                kv = eval_kernel(spec, d).reshape(du2.shape)
                e += c * kv * J[i, None] * J[None, :]
            e[same] = 0.0
            parts.append(math.fsum((du2 * e).ravel()))
        excess.append(hn * hn * math.fsum(parts))
        vol.append(hn * math.fsum((pos * (Jp + Jm - 2.0))[inside]))
    excess = np.asarray(excess)
    good = excess > 0
    slope = float(np.polyfit(np.log(ts[good]), np.log(excess[good]), 1)[0]) if good.sum() >= 2 else float("nan")
    return ExcessScaling(ts, excess, np.asarray(vol), slope)
