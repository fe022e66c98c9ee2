"""Homogeneous anisotropic kernels and their direction constants.

A kernel is K(h) = a(h/|h|) |h|^{-n-2s} with an even angular density a.
Applied to a one-dimensional profile v(x.nu) the operator
L u(x) = 2 p.v. int (u(x) - u(y)) K(x - y) dy reduces to

    L v = B(nu) * (-Delta)^s_R v,    B(nu) = int_S a(theta) |theta.nu|^{2s} / c_{1,s}

and the free boundary constant is A(nu) = Gamma(1+s)^{-1} B(nu)^{-1/2}.
The fractional Laplacian density a = c_{n,s}/2 gives B = 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import zeta

__all__ = [
    "KernelSpec",
    "SphereQuadrature",
    "eval_kernel",
    "direction_constant_B",
    "free_boundary_constant_A",
    "frac_laplacian_constant",
    "normalization",
    "isotropic",
    "frac_laplacian",
    "cos2",
    "tabulated",
    "kernel_from_config",
    "first_variation_amplitude",
]


def frac_laplacian_constant(n: int, s: float) -> float:
    """c_{n,s} with (-Delta)^s u = c_{n,s} p.v. int (u(x)-u(y)) |x-y|^{-n-2s} dy."""
    return s * 4.0**s * math.gamma(n / 2 + s) / (math.pi ** (n / 2) * math.gamma(1 - s))


def normalization(s: float) -> float:
    """Z(s) such that B = 1 for the fractional Laplacian."""
    return 1.0 / frac_laplacian_constant(1, s)


def _angles(theta: np.ndarray) -> np.ndarray:
    return np.arctan2(theta[..., 1], theta[..., 0])


@dataclass(frozen=True)
class KernelSpec:
    """K(h) = a(h/|h|) |h|^{-n-2s}.

    ``density`` maps an (m, n) array of unit vectors to m positive values.
    It is symmetrized at construction, so a(theta) = a(-theta) holds exactly.
    """

    n: int
    s: float
    density: Callable[[np.ndarray], np.ndarray]
    lambda_bound: float
    Lambda_bound: float
    name: str = "custom"
    descriptor: str = ""
    _raw: Callable[[np.ndarray], np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.n}")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie strictly inside (0, 1), got {self.s}")
        if not 0.0 < self.lambda_bound <= self.Lambda_bound:
            raise ValueError("need 0 < lambda_bound <= Lambda_bound")
        raw = self.density
        object.__setattr__(self, "_raw", raw)

        def symmetric(theta):
            theta = np.asarray(theta, dtype=float)
            return 0.5 * (np.asarray(raw(theta), dtype=float) + np.asarray(raw(-theta), dtype=float))

        object.__setattr__(self, "density", symmetric)
        probe = SphereQuadrature.default(self.n, 256).nodes
        vals = self.density(probe)
        tol = 1e-12 * self.Lambda_bound
        if np.any(vals < self.lambda_bound - tol) or np.any(vals > self.Lambda_bound + tol):
            raise ValueError(
                f"density leaves [{self.lambda_bound}, {self.Lambda_bound}]: "
                f"range [{vals.min():.6g}, {vals.max():.6g}]"
            )

    def a(self, theta) -> np.ndarray:
        return self.density(np.atleast_2d(np.asarray(theta, dtype=float)))

    def scaled(self, c: float) -> "KernelSpec":
        dens = self._raw
        return KernelSpec(self.n, self.s, lambda t: c * np.asarray(dens(t), dtype=float),
                          c * self.lambda_bound, c * self.Lambda_bound,
                          name=f"{c}*{self.name}", descriptor=self.descriptor)


@dataclass(frozen=True)
class SphereQuadrature:
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("sphere quadrature weights must be positive")

    @property
    def n(self) -> int:
        return self.nodes.shape[1]

    @classmethod
    def default(cls, n: int, m: int = 512) -> "SphereQuadrature":
        if n == 1:
            return cls(np.array([[1.0], [-1.0]]), np.array([1.0, 1.0]))
        if n != 2:
            raise ValueError(f"unsupported dimension {n}")
        phi = 2 * np.pi * np.arange(m) / m
        return cls(np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(m, 2 * np.pi / m))

    def measure(self) -> float:
        return float(self.weights.sum())

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def eval_kernel(spec: KernelSpec, h) -> np.ndarray | float:
    """K(h) for one displacement (shape (n,)) or a stack (shape (m, n))."""
    h = np.asarray(h, dtype=float)
    single = h.ndim == 1
    h = np.atleast_2d(h)
    r = np.linalg.norm(h, axis=1)
    if np.any(r == 0):
        raise ValueError("kernel is singular at zero displacement")
    vals = spec.density(h / r[:, None]) * r ** (-spec.n - 2 * spec.s)
    return float(vals[0]) if single else vals


def _unit(nu) -> np.ndarray:
    nu = np.asarray(nu, dtype=float).ravel()
    norm = np.linalg.norm(nu)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"direction must be a unit vector, |nu| = {norm}")
    return nu / norm


def _moment(spec: KernelSpec, nu: np.ndarray, quad: SphereQuadrature) -> float:
    """int_S a(theta) |theta.nu|^{2s} dtheta."""
    if np.any(quad.weights <= 0):
        raise ValueError("sphere quadrature weights must be positive")
    s = spec.s
    if spec.n == 1:
        return float(np.dot(quad.weights, spec.density(quad.nodes) * np.abs(quad.nodes[:, 0] * nu[0]) ** (2 * s)))
    # Trapezoid on nodes rotated so that the two zeros of theta.nu are nodes,
    # plus the generalized Euler-Maclaurin term for the |psi|^{2s} endpoint.
    m = len(quad.weights)
    step = 2 * np.pi / m
    base = math.atan2(nu[1], nu[0]) + np.pi / 2
    phi = base + step * np.arange(m)
    theta = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    vals = spec.density(theta) * np.abs(theta @ nu) ** (2 * s)
    total = step * float(vals.sum())
    perp = np.array([[-nu[1], nu[0]], [nu[1], -nu[0]]])
    corr = 2 * zeta(-2 * s) * step ** (1 + 2 * s) * float(spec.density(perp).sum())
    return total - corr


def direction_constant_B(spec: KernelSpec, nu, quad: SphereQuadrature | None = None) -> float:
    quad = quad or SphereQuadrature.default(spec.n)
    return normalization(spec.s) * _moment(spec, _unit(nu), quad)


def free_boundary_constant_A(spec: KernelSpec, nu, quad: SphereQuadrature | None = None) -> float:
    return 1.0 / (math.gamma(1 + spec.s) * math.sqrt(direction_constant_B(spec, nu, quad)))


# -- densities ---------------------------------------------------------------

def isotropic(n: int, s: float, value: float = 1.0) -> KernelSpec:
    return KernelSpec(n, s, lambda t: np.full(len(t), value), value, value,
                      name="isotropic", descriptor="isotropic")


def frac_laplacian(n: int, s: float) -> KernelSpec:
    c = 0.5 * frac_laplacian_constant(n, s)
    return KernelSpec(n, s, lambda t: np.full(len(t), c), c, c,
                      name="frac_laplacian", descriptor="frac_laplacian")


def cos2(n: int, s: float, amplitude: float) -> KernelSpec:
    """a(theta) = 1 + amplitude * (theta.e1)^2."""
    if amplitude <= -1:
        raise ValueError("cos2 amplitude must exceed -1")
    lo, hi = sorted((1.0, 1.0 + amplitude))
    return KernelSpec(n, s, lambda t: 1.0 + amplitude * np.asarray(t)[:, 0] ** 2, lo, hi,
                      name=f"cos2({amplitude:g})", descriptor=f"cos2:{amplitude:g}")


def tabulated(s: float, angles, values, n: int = 2) -> KernelSpec:
    """Density sampled at angles (radians), periodic linear interpolation."""
    angles = np.mod(np.asarray(angles, dtype=float), 2 * np.pi)
    values = np.asarray(values, dtype=float)
    order = np.argsort(angles)
    angles, values = angles[order], values[order]
    if np.any(values <= 0):
        raise ValueError("tabulated density must be positive")

    def dens(t):
        t = np.asarray(t, dtype=float)
        if n == 1:
            phi = np.where(t[:, 0] > 0, 0.0, np.pi)
        else:
            phi = np.mod(_angles(t), 2 * np.pi)
        return np.interp(phi, angles, values, period=2 * np.pi)

    return KernelSpec(n, s, dens, float(values.min()), float(values.max()),
                      name="table", descriptor="table")


def _read_table(path: str) -> tuple[np.ndarray, np.ndarray]:
    angles, values = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                angles.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError:
                if not angles:  # header
                    continue
                raise
    return np.array(angles), np.array(values)


def kernel_from_config(section: dict) -> KernelSpec:
    """Build a kernel from keys ``s``, ``dim`` and ``density``."""
    try:
        s = float(section["s"])
        n = int(section.get("dim", 2))
        density = str(section.get("density", "frac_laplacian")).strip()
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad kernel section: {exc}") from exc
    if density == "isotropic":
        spec = isotropic(n, s)
    elif density == "frac_laplacian":
        spec = frac_laplacian(n, s)
    elif density.startswith("cos2:"):
        spec = cos2(n, s, float(density.split(":", 1)[1]))
    elif density.startswith("table:"):
        path = density.split(":", 1)[1]
        spec = tabulated(s, *_read_table(path), n=n)
    else:
        raise ValueError(f"unknown kernel density {density!r}")
    return KernelSpec(spec.n, spec.s, spec._raw, spec.lambda_bound, spec.Lambda_bound,
                      name=spec.name, descriptor=density)


# -- normalization oracle ----------------------------------------------------

def _smoothstep(x, lo, hi):
    t = np.clip((np.abs(x) - lo) / (hi - lo), 0.0, 1.0)
    val = 1 - (6 * t**5 - 15 * t**4 + 10 * t**3)
    der = -np.sign(x) * (30 * t**4 - 60 * t**3 + 30 * t**2) / (hi - lo)
    return val, der


def _gl_panels(edges, npts):
    x, w = np.polynomial.legendre.leggauss(npts)
    a, b = np.asarray(edges[:-1]), np.asarray(edges[1:])
    half = 0.5 * (b - a)
    return ((half[:, None] * x + (0.5 * (a + b))[:, None]).ravel(),
            (half[:, None] * w).ravel())


_GRADE = 2.0 ** -np.arange(1, 16)


def first_variation_amplitude(s: float, density: float, plateau=(0.5, 1.0),
                              npts: int = 10, far: float = 1e48) -> float:
    """Amplitude alpha* at which the one-sided shape derivative of the 1D energy vanishes.

    Independent check on the normalization: for u = alpha t_+^s on the line with
    kernel density ``density`` (K = density |h|^{-1-2s}) the free boundary is
    moved by Psi = id + eps*phi, phi = 1 near 0.  The interaction derivative is
    alpha^2 J with

        J = iint (u(x)-u(y))^2 K(x-y) [phi'(x) + phi'(y) - (1+2s)(phi(x)-phi(y))/(x-y)]

    (u = t_+^s) and the volume derivative is -phi(0) = -1, so alpha* = J^{-1/2}.
    Pairs inside the plateau of phi do not contribute, which keeps the
    integrand away from the free boundary singularity.
    """
    p0, p1 = plateau
    kinks = np.array([-p1, -p0, 0.0, p0, p1])

    def u(t):
        return np.maximum(t, 0.0) ** s

    # outer variable: x on the support of phi, plus log-mapped far field
    graded = p0 * 2.0 ** -np.arange(1, 24)
    xs, wx = _gl_panels(np.unique(np.concatenate([np.linspace(-p1, p1, 17), graded, -graded])), npts)
    tau_edges = np.arange(math.log(p1), math.log(far) + 0.5, 0.5)
    ti, wti = _gl_panels(tau_edges, npts)
    xs = np.concatenate([xs, np.exp(ti), -np.exp(ti)])
    wx = np.concatenate([wx, wti * np.exp(ti), wti * np.exp(ti)])

    total = 0.0
    for x, w in zip(xs, wx):
        d = np.abs(x - kinks)
        d = d[d > 1e-14 * max(1.0, abs(x))]
        lo = math.log(max(1e-14, 1e-12 * abs(x)))
        refine = (np.log(d)[:, None] + np.concatenate([-_GRADE, _GRADE])[None, :]).ravel()
        top = math.log(far)
        edges = np.concatenate([np.log(d), refine, np.arange(lo, top, 0.5), [top]])
        edges = np.unique(edges[(edges >= lo) & (edges <= top)])
        tau, wt = _gl_panels(edges, npts)
        h = np.exp(tau)
        wh = wt * h
        phix, dphix = _smoothstep(x, p0, p1)
        acc = 0.0
        for sign in (1.0, -1.0):
            y = x + sign * h
            diff = x - y
            phiy, dphiy = _smoothstep(y, p0, p1)
            q = dphix + dphiy - (1 + 2 * s) * (phix - phiy) / diff
            ker = wh * np.abs(diff) ** (-1 - 2 * s)
            acc += np.sum(ker * (u(x) - u(y)) ** 2 * density * q)
        total += w * acc
    return 1.0 / math.sqrt(total)
