"""Grid fields with analytic exterior data and the discrete nonlocal energy.

Nodes carry cells of side h, so the grid covers the box Omega' = [lo - h/2, hi + h/2].
The energy over ordered pairs in (Omega^c x Omega^c)^c splits into

    grid pairs       sum_{i,j in G, not both in the frame} w_ij (u_i - u_j)^2
    far pairs        2 h^n sum_{i in Omega} int_{y outside Omega'} (u_i - g(y))^2 K(x_i - y) dy

with w_ij = h^{2n} K(h(i-j)) plus a near-diagonal correction that restores
the second moment of K over the (2m+1)^n block around the diagonal.  All grid
sums are convolutions with the tabulated weight and are done by FFT.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import fft as sfft
from scipy.interpolate import RegularGridInterpolator

from .halfspace import ZeroExterior, exterior_from_dict
from .kernel import KernelSpec, SphereQuadrature, isotropic

__all__ = [
    "Grid",
    "Field",
    "Ball",
    "EnergyBreakdown",
    "EnergyModel",
    "energy_model",
    "interaction_energy",
    "volume_term",
    "total_energy",
    "minmax_identity_check",
    "cross_term",
    "hs_seminorm",
    "direct_interaction",
]

NEAR_CELLS = 2
FAR_DOUBLINGS = 20


@dataclass(frozen=True)
class Grid:
    lo: tuple
    hi: tuple
    shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(c) for c in self.lo))
        object.__setattr__(self, "hi", tuple(float(c) for c in self.hi))
        object.__setattr__(self, "shape", tuple(int(c) for c in self.shape))
        if not (len(self.lo) == len(self.hi) == len(self.shape)):
            raise ValueError("grid bounds and shape disagree in dimension")
        steps = [(b - a) / (m - 1) for a, b, m in zip(self.lo, self.hi, self.shape)]
        if min(steps) <= 0 or max(steps) - min(steps) > 1e-12 * max(steps):
            raise ValueError(f"grid spacing must be uniform and positive, got {steps}")

    @classmethod
    def cube(cls, half_width: float, nodes: int, n: int = 2, center=None) -> "Grid":
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        return cls(tuple(c - half_width), tuple(c + half_width), (nodes,) * n)

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def h(self) -> float:
        return (self.hi[0] - self.lo[0]) / (self.shape[0] - 1)

    @property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lo) - self.h / 2, np.asarray(self.hi) + self.h / 2

    def axes(self) -> list[np.ndarray]:
        return [a + self.h * np.arange(m) for a, m in zip(self.lo, self.shape)]

    def points(self) -> np.ndarray:
        """All node coordinates, shape grid.shape + (n,)."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def box_mask(self, lo, hi) -> np.ndarray:
        """Nodes strictly inside the open box (lo, hi)."""
        x = self.points()
        tol = 1e-9 * self.h
        return np.all((x > np.asarray(lo) + tol) & (x < np.asarray(hi) - tol), axis=-1)


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float


def _suffixed(prefix: Path, ext: str) -> Path:
    return prefix.with_name(prefix.name + ext)


@dataclass
class Field:
    grid: Grid
    values: np.ndarray
    omega: tuple  # (lo, hi) of the inner box
    exterior: object = field(default_factory=ZeroExterior)
    s: float = 0.5

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        self.omega = (tuple(float(c) for c in self.omega[0]), tuple(float(c) for c in self.omega[1]))

    @classmethod
    def from_exterior(cls, grid: Grid, omega, exterior, s: float, inside=None) -> "Field":
        """Frame nodes take the exterior data; Omega nodes take `inside` (default: the exterior too)."""
        pts = grid.points().reshape(-1, grid.n)
        vals = np.asarray(exterior(pts), dtype=float).reshape(grid.shape)
        f = cls(grid, vals, omega, exterior, s)
        if inside is not None:
            m = f.mask
            vals[m] = np.asarray(inside(pts.reshape(grid.shape + (grid.n,))[m]), dtype=float)
        return f

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def mask(self) -> np.ndarray:
        return self.grid.box_mask(*self.omega)

    def with_values(self, values) -> "Field":
        return Field(self.grid, np.array(values, dtype=float), self.omega, self.exterior, self.s)

    def evaluate(self, x) -> np.ndarray:
        """Multilinear interpolation inside the node hull, exterior data beyond it."""
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        x = x.reshape(-1, self.n)
        lo, hi = np.asarray(self.grid.lo), np.asarray(self.grid.hi)
        inside = np.all((x >= lo) & (x <= hi), axis=1)
        out = np.empty(len(x))
        if inside.any():
            interp = RegularGridInterpolator(self.grid.axes(), self.values, method="linear")
            out[inside] = interp(x[inside])
        if (~inside).any():
            out[~inside] = self.exterior(x[~inside])
        return out.reshape(shape)

    __call__ = evaluate

    # -- persistence --------------------------------------------------------
    def sidecar(self) -> dict:
        return {
            "dims": list(self.grid.shape),
            "spacing": self.grid.h,
            "origin": list(self.grid.lo),
            "omega_box": [list(self.omega[0]), list(self.omega[1])],
            "exterior_descriptor": self.exterior.to_dict(),
            "s": self.s,
        }

    def save(self, prefix) -> None:
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        np.ascontiguousarray(self.values, dtype="<f8").tofile(_suffixed(prefix, ".bin"))
        _suffixed(prefix, ".json").write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, prefix) -> "Field":
        prefix = Path(prefix)
        meta = json.loads(_suffixed(prefix, ".json").read_text())
        dims = tuple(meta["dims"])
        lo = np.asarray(meta["origin"], dtype=float)
        hi = lo + meta["spacing"] * (np.asarray(dims) - 1)
        vals = np.fromfile(_suffixed(prefix, ".bin"), dtype="<f8").reshape(dims)
        return cls(Grid(tuple(lo), tuple(hi), dims), vals, tuple(map(tuple, meta["omega_box"])),
                   exterior_from_dict(meta["exterior_descriptor"]), float(meta["s"]))

    def to_csv(self, path) -> None:
        pts = self.grid.points().reshape(-1, self.n)
        cols = ["x", "y"][: self.n] + ["u"]
        data = np.column_stack([pts, self.values.ravel()])
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


@dataclass(frozen=True)
class EnergyBreakdown:
    interaction: float
    volume: float
    far_field: float
    total: float


# -- weights ------------------------------------------------------------------

def _box_second_moment(spec: KernelSpec, half: float, n_angles: int = 8192) -> np.ndarray:
    """int over the cube |z|_inf < half of z (x) z K(z) dz."""
    p = 2 - 2 * spec.s
    if spec.n == 1:
        a = spec.density(np.array([[1.0], [-1.0]])).sum()
        return np.array([[a * half**p / p]])
    # trapezoid with the corner directions as nodes (the radial extent has kinks there)
    phi = 2 * np.pi * (np.arange(n_angles) + 0.0) / n_angles + np.pi / 4
    theta = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    rho = half / np.abs(theta).max(axis=1)
    w = (2 * np.pi / n_angles) * spec.density(theta) * rho**p / p
    return np.einsum("k,ki,kj->ij", w, theta, theta)


def _near_correction(spec: KernelSpec, h: float, m: int = NEAR_CELLS) -> dict:
    """Extra weights on the nearest neighbours restoring the local second moment."""
    n = spec.n
    exact = _box_second_moment(spec, (m + 0.5) * h)
    rng = np.arange(-m, m + 1)
    disp = np.stack(np.meshgrid(*([rng] * n), indexing="ij"), axis=-1).reshape(-1, n)
    disp = disp[np.any(disp != 0, axis=1)] * h
    r = np.linalg.norm(disp, axis=1)
    k = spec.density(disp / r[:, None]) * r ** (-n - 2 * spec.s)
    deficit = exact - h**n * np.einsum("k,ki,kj->ij", k, disp, disp)
    if n == 1:
        c = deficit[0, 0] / (2 * h)
        return {(1,): c, (-1,): c}
    # 2 h^2 [c1 p1^2 + c2 p2^2 + c+ (p1+p2)^2 + c- (p1-p2)^2] = h^2 p.D.p
    cp, cm = max(deficit[0, 1], 0.0) / 2, max(-deficit[0, 1], 0.0) / 2
    c1 = deficit[0, 0] / 2 - cp - cm
    c2 = deficit[1, 1] / 2 - cp - cm
    corr = {}
    for d, c in (((1, 0), c1), ((0, 1), c2), ((1, 1), cp), ((1, -1), cm)):
        corr[d] = c
        corr[tuple(-x for x in d)] = c
    return corr


def weight_table(spec: KernelSpec, grid: Grid) -> np.ndarray:
    """w(d) for all lattice displacements, shape 2*grid.shape - 1, centre = zero displacement."""
    n, h = grid.n, grid.h
    rngs = [np.arange(-(m - 1), m) for m in grid.shape]
    d = np.stack(np.meshgrid(*rngs, indexing="ij"), axis=-1).astype(float)
    r = np.linalg.norm(d, axis=-1)
    centre = tuple(m - 1 for m in grid.shape)
    r[centre] = 1.0
    theta = (d / r[..., None]).reshape(-1, n)
    W = (h ** (n - 2 * spec.s)) * spec.density(theta).reshape(r.shape) * r ** (-n - 2 * spec.s)
    W[centre] = 0.0
    for disp, c in _near_correction(spec, h).items():
        idx = tuple(ci + di for ci, di in zip(centre, disp))
        if all(0 <= i < 2 * m - 1 for i, m in zip(idx, grid.shape)):
            W[idx] += c
    return W


class _Convolver:
    """f -> (W * f)_i = sum_j w(i - j) f_j on the grid, by a cached real FFT."""

    def __init__(self, W: np.ndarray, shape: tuple):
        self.shape = shape
        self.full = tuple(sfft.next_fast_len(w + m - 1, real=True) for w, m in zip(W.shape, shape))
        self.Wf = sfft.rfftn(W, self.full)
        self.sl = tuple(slice(m - 1, 2 * m - 1) for m in shape)

    def __call__(self, f: np.ndarray) -> np.ndarray:
        out = sfft.irfftn(sfft.rfftn(f, self.full) * self.Wf, self.full)
        return out[self.sl]


def _fsum(a) -> float:
    return math.fsum(np.ravel(a))


# -- far field ----------------------------------------------------------------

def _ray_nodes(P: int, q: int):
    """Graded nodes on [0, 1] clustering at both ends, with weights."""
    g, gw = np.polynomial.legendre.leggauss(q)
    e = np.linspace(0, 1, P + 1)
    xi = (0.5 * (e[1:] + e[:-1])[:, None] + 0.5 * (e[1:] - e[:-1])[:, None] * g).ravel()
    wxi = (0.5 * (e[1:] - e[:-1])[:, None] * gw).ravel()
    t = 0.5 * (1 - np.cos(np.pi * xi))
    wt = wxi * 0.5 * np.pi * np.sin(np.pi * xi)
    return t, wt


def far_moments(spec: KernelSpec, grid: Grid, points: np.ndarray, ext_u, ext_v,
                n_angles: int = 128, panels: int = 12, order: int = 4, chunk_elems: int = 4_000_000):
    """Per node x: k0 = int_out K, k1u = int_out g_u K, k1v, k2 = int_out g_u g_v K.

    Rays leave the cell box at rho(x, theta).  Radial integrals are split at
    the kinks of the exterior data and truncated at 2^20 box diameters; the
    linear moments add the analytic r^s remainder.  The quadratic one does
    not depend on u and diverges logarithmically; it is truncated at one box
    diameter so that reported energies stay O(1).
    """
    n, s = grid.n, spec.s
    quad = SphereQuadrature.default(n, n_angles)
    theta, wth = quad.nodes, quad.weights * spec.density(quad.nodes)
    lo, hi = grid.box
    diam = float(np.linalg.norm(hi - lo))
    rfar = (2.0**FAR_DOUBLINGS) * diam
    t_nodes, t_w = _ray_nodes(panels, order)
    X = np.atleast_2d(points)
    m = len(X)
    same = ext_u is ext_v or ext_u == ext_v
    k0 = np.empty(m)
    k1u, k1v, k2 = np.empty(m), np.empty(m), np.empty(m)
    cu = ext_u.asymptotic(theta)
    cv = cu if same else ext_v.asymptotic(theta)

    with np.errstate(divide="ignore"):
        inv = 1.0 / theta
    step = max(1, chunk_elems // (len(theta) * 4 * len(t_nodes)))
    for start in range(0, m, step):
        x = X[start:start + step]
        sl = slice(start, start + len(x))
        # exit distance from the box along each ray
        d = np.where(inv[None] > 0, (hi - x[:, None, :]) * inv[None], (lo - x[:, None, :]) * inv[None])
        d = np.where(np.isfinite(d) & (d >= 0), d, np.inf)
        rho = d.min(axis=-1)  # (c, M)
        k0[sl] = (rho ** (-2 * s) / (2 * s)) @ wth

        bps = [ext_u.breakpoints(x[:, None, :], theta[None])]
        if not same:
            bps.append(ext_v.breakpoints(x[:, None, :], theta[None]))
        bps.append(np.full(rho.shape + (1,), diam))
        bp = np.concatenate(bps, axis=-1)
        bp = np.where((bp > rho[..., None]) & (bp < rfar), bp, rfar)
        edges = np.concatenate([rho[..., None], np.sort(bp, axis=-1), np.full(rho.shape + (1,), rfar)], axis=-1)
        ta, tb = np.log(edges[..., :-1]), np.log(edges[..., 1:])  # (c, M, p)
        tau = ta[..., None] + (tb - ta)[..., None] * t_nodes  # (c, M, p, q)
        wtau = (tb - ta)[..., None] * t_w
        r = np.exp(tau)
        y = x[:, None, None, None, :] + r[..., None] * theta[None, :, None, None, :]
        flat = y.reshape(-1, n)
        gu = ext_u(flat).reshape(r.shape)
        gv = gu if same else ext_v(flat).reshape(r.shape)
        rw = wtau * np.exp(-2 * s * tau)
        close = rfar ** (-s) / s
        k1u[sl] = ((gu * rw).sum(axis=(2, 3)) + cu[None] * close) @ wth
        k1v[sl] = k1u[sl] if same else ((gv * rw).sum(axis=(2, 3)) + cv[None] * close) @ wth
        k2[sl] = (gu * gv * rw * (tau < math.log(diam))).sum(axis=(2, 3)) @ wth
    return k0, k1u, k1v, k2


# -- the model ----------------------------------------------------------------

class EnergyModel:
    """Cached quadrature for one (kernel, grid, Omega, exterior) combination."""

    def __init__(self, spec: KernelSpec, grid: Grid, omega, exterior, far: bool = True):
        if spec.n != grid.n:
            raise ValueError("kernel and grid dimensions differ")
        self.spec, self.grid, self.exterior = spec, grid, exterior
        self.omega = (tuple(omega[0]), tuple(omega[1]))
        self.mask = grid.box_mask(*self.omega)
        self.frame = ~self.mask
        self.hn = grid.h**grid.n
        self.conv = _Convolver(weight_table(spec, grid), grid.shape)
        self.rowsum = self.conv(np.ones(grid.shape))
        pts = grid.points()
        self.g = np.asarray(exterior(pts.reshape(-1, grid.n)), dtype=float).reshape(grid.shape)
        gf = np.where(self.frame, self.g, 0.0)
        self.frame_energy = 2 * _fsum(gf**2 * self.conv(self.frame.astype(float))) - 2 * _fsum(gf * self.conv(gf))
        self.k0 = np.zeros(grid.shape)
        self.k1 = np.zeros(grid.shape)
        self.k2 = np.zeros(grid.shape)
        if far:
            k0, k1, _, k2 = far_moments(spec, grid, pts[self.mask], exterior, exterior)
            self.k0[self.mask], self.k1[self.mask], self.k2[self.mask] = k0, k1, k2
        self._lipschitz = None

    def full(self, inner: np.ndarray) -> np.ndarray:
        """Grid array with frame nodes reset to the exterior data."""
        return np.where(self.mask, inner, self.g)

    def interaction(self, u: np.ndarray) -> tuple[float, float]:
        """(grid part, far part) of E_{(Omega^c x Omega^c)^c}(u, u)."""
        u = self.full(u)
        grid_part = 2 * _fsum(u**2 * self.rowsum) - 2 * _fsum(u * self.conv(u)) - self.frame_energy
        um = np.where(self.mask, u, 0.0)
        far = 2 * self.hn * _fsum(um**2 * self.k0 - 2 * um * self.k1 + self.k2)
        return grid_part, far

    def gradient(self, u: np.ndarray) -> np.ndarray:
        """Gradient of the interaction in the Omega values (zero on the frame)."""
        u = self.full(u)
        g = 4 * (self.rowsum * u - self.conv(u)) + 4 * self.hn * (u * self.k0 - self.k1)
        return np.where(self.mask, g, 0.0)

    def lipschitz(self) -> float:
        """Largest eigenvalue of the interaction Hessian on Omega (power iteration)."""
        if self._lipschitz is None:
            v = np.where(self.mask, 1.0 + 0.1 * np.cos(np.arange(self.mask.size)).reshape(self.mask.shape), 0.0)
            lam = 0.0
            for _ in range(60):
                w = 4 * (self.rowsum * v - self.conv(v)) + 4 * self.hn * v * self.k0
                w = np.where(self.mask, w, 0.0)
                lam_new = float(np.sqrt((w**2).sum() / (v**2).sum()))
                v = w / np.linalg.norm(w)
                if abs(lam_new - lam) < 1e-6 * lam_new:
                    lam = lam_new
                    break
                lam = lam_new
            # Gershgorin bound as a safety net
            self._lipschitz = min(1.05 * lam, float((8 * self.rowsum + 4 * self.hn * self.k0)[self.mask].max()))
        return self._lipschitz

    def volume(self, u: np.ndarray, delta: float = 0.0) -> float:
        return volume_term_array(u, self.mask, self.hn, delta)

    def energy(self, u: np.ndarray, delta: float = 0.0) -> EnergyBreakdown:
        inter, far = self.interaction(u)
        vol = self.volume(u, delta)
        return EnergyBreakdown(inter, vol, far, inter + far + vol)


_MODELS: dict = {}


def energy_model(spec: KernelSpec, grid: Grid, omega, exterior) -> EnergyModel:
    key = (id(spec), grid, tuple(map(tuple, omega)), exterior)
    hit = _MODELS.get(key)
    if hit is not None and hit[0] is spec:
        return hit[1]
    model = EnergyModel(spec, grid, omega, exterior)
    if len(_MODELS) > 8:
        _MODELS.pop(next(iter(_MODELS)))
    _MODELS[key] = (spec, model)
    return model


# -- public operations --------------------------------------------------------

def volume_term_array(u: np.ndarray, mask: np.ndarray, hn: float, delta: float = 0.0) -> float:
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    um = u[mask]
    if delta == 0:
        return hn * int(np.count_nonzero(um > 0))
    return hn * _fsum(np.minimum(1.0, np.maximum(um, 0.0) / delta))


def volume_term(u: Field, delta: float = 0.0) -> float:
    return volume_term_array(u.values, u.mask, u.grid.h**u.n, delta)


def _check_pair(u: Field, v: Field):
    if u.grid != v.grid or u.values.shape != v.values.shape:
        raise ValueError("fields live on different grids")


def _ball_mask(grid: Grid, ball: Ball) -> np.ndarray:
    c = np.asarray(ball.center, dtype=float)
    if np.any(c - ball.radius < np.asarray(grid.lo) - 1e-12) or np.any(c + ball.radius > np.asarray(grid.hi) + 1e-12):
        raise ValueError("ball is not covered by the grid")
    return np.linalg.norm(grid.points() - c, axis=-1) <= ball.radius


def _masked_bilinear(conv: _Convolver, mask: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    """sum_{i,j in mask} w_ij (u_i - u_j)(v_i - v_j)."""
    m = mask.astype(float)
    um, vm = u * m, v * m
    return (2 * _fsum(um * v * conv(m)) - _fsum(um * conv(vm)) - _fsum(vm * conv(um)))


def interaction_energy(spec: KernelSpec, u: Field, v: Field, domain="complement") -> float:
    """E_D(u, v) over ordered pairs; D is the complement selector or a Ball (pairs inside it)."""
    _check_pair(u, v)
    grid = u.grid
    conv = _Convolver(weight_table(spec, grid), grid.shape)
    if isinstance(domain, Ball):
        return _masked_bilinear(conv, _ball_mask(grid, domain), u.values, v.values)
    if domain != "complement":
        raise ValueError(f"unknown pair-set selector {domain!r}")
    mask = u.mask
    if not np.array_equal(mask, v.mask):
        raise ValueError("fields have different Omega")
    ones = np.ones(grid.shape, dtype=bool)
    grid_part = _masked_bilinear(conv, ones, u.values, v.values) - _masked_bilinear(conv, ~mask, u.values, v.values)
    if u.exterior == v.exterior:
        model = energy_model(spec, grid, u.omega, u.exterior)
        k0, k1u, k1v, k2 = model.k0[mask], model.k1[mask], model.k1[mask], model.k2[mask]
    else:
        k0, k1u, k1v, k2 = far_moments(spec, grid, grid.points()[mask], u.exterior, v.exterior)
    uu, vv = u.values[mask], v.values[mask]
    far = 2 * grid.h**grid.n * _fsum(uu * vv * k0 - uu * k1v - vv * k1u + k2)
    return grid_part + far


def total_energy(spec: KernelSpec, u: Field, delta: float = 0.0) -> EnergyBreakdown:
    return energy_model(spec, u.grid, u.omega, u.exterior).energy(u.values, delta)


def cross_term(spec: KernelSpec, u: Field, v: Field) -> float:
    """X = sum over ordered pairs of (u-v)_+(x) (u-v)_-(y) K(x-y), on the same pair set as the energy.

    (u-v)_+ and (u-v)_- vanish off Omega, so only grid pairs inside Omega contribute.
    """
    _check_pair(u, v)
    model = energy_model(spec, u.grid, u.omega, u.exterior)
    d = np.where(model.mask, u.values - v.values, 0.0)
    p, m = np.maximum(d, 0.0), np.maximum(-d, 0.0)
    return _fsum(p * model.conv(m))


def minmax_identity_check(spec: KernelSpec, u: Field, v: Field, relative: bool = True) -> float:
    """|I(u^v) + I(uvv) + 4X - I(u) - I(v)| with X the one-sided cross term over ordered pairs."""
    _check_pair(u, v)
    lo = u.with_values(np.minimum(u.values, v.values))
    hi = u.with_values(np.maximum(u.values, v.values))
    terms = [total_energy(spec, f).total for f in (lo, hi, u, v)]
    x = cross_term(spec, u, v)
    res = abs(math.fsum([terms[0], terms[1], 4 * x, -terms[2], -terms[3]]))
    if not relative:
        return res
    scale = max(abs(t) for t in terms + [4 * x])
    return res / scale if scale > 0 else res


def hs_seminorm(u: Field, ball: Ball) -> float:
    """Gagliardo seminorm over the ball with the pure |x-y|^{-n-2s} weight."""
    spec = isotropic(u.n, u.s)
    conv = _Convolver(weight_table(spec, u.grid), u.grid.shape)
    val = _masked_bilinear(conv, _ball_mask(u.grid, ball), u.values, u.values)
    return math.sqrt(max(val, 0.0))


def direct_interaction(spec: KernelSpec, grid: Grid, mask: np.ndarray, u: np.ndarray, v: np.ndarray,
                       pair_mask: np.ndarray | None = None) -> float:
    """Brute-force double sum of the grid part with the same weights (small grids only).

    Default pair set: pairs with at least one node in `mask`; with pair_mask, pairs inside it.
    """
    W = weight_table(spec, grid)
    centre = np.array([m - 1 for m in grid.shape])
    idx = np.argwhere(np.ones(grid.shape, dtype=bool))
    total = []
    for i in idx:
        for j in idx:
            if pair_mask is not None:
                if not (pair_mask[tuple(i)] and pair_mask[tuple(j)]):
                    continue
            elif not (mask[tuple(i)] or mask[tuple(j)]):
                continue
            w = W[tuple(centre + i - j)]
            total.append(w * (u[tuple(i)] - u[tuple(j)]) * (v[tuple(i)] - v[tuple(j)]))
    return math.fsum(total)
