"""Half-space profiles, the operator L applied to them, and the tail functional."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import binom

from .kernel import KernelSpec, SphereQuadrature, _moment, _unit

__all__ = [
    "HalfSpaceProfile",
    "WedgeProfile",
    "ZeroExterior",
    "eval_profile",
    "apply_L_to_profile",
    "halfline_constant",
    "tail",
    "DivergenceError",
    "exterior_from_dict",
]


class DivergenceError(ArithmeticError):
    """Raised when a far-field integral does not converge."""


@dataclass(frozen=True)
class ZeroExterior:
    n: int = 2

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.zeros(len(x))

    def asymptotic(self, theta) -> np.ndarray:
        return np.zeros(len(np.atleast_2d(theta)))

    def breakpoints(self, origins, theta) -> np.ndarray:
        return np.empty(np.broadcast_shapes(origins.shape[:-1], theta.shape[:-1]) + (0,))

    def to_dict(self) -> dict:
        return {"type": "zero", "n": self.n}


@dataclass(frozen=True)
class HalfSpaceProfile:
    """amplitude * (x.nu + shift)_+^s."""

    nu: tuple
    shift: float
    amplitude: float
    s: float

    def __post_init__(self):
        object.__setattr__(self, "nu", tuple(float(c) for c in _unit(self.nu)))
        if self.amplitude < 0:
            raise ValueError("profile amplitude must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.nu)

    @property
    def normal(self) -> np.ndarray:
        return np.asarray(self.nu)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.amplitude * np.maximum(x @ self.normal + self.shift, 0.0) ** self.s

    def asymptotic(self, theta) -> np.ndarray:
        theta = np.atleast_2d(theta)
        return self.amplitude * np.maximum(theta @ self.normal, 0.0) ** self.s

    def breakpoints(self, origins, theta) -> np.ndarray:
        """Radii r where x + r*theta crosses the free hyperplane."""
        lin = origins @ self.normal + self.shift
        q = theta @ self.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            r = -lin / q
        return np.where(r > 0, r, np.nan)[..., None]

    def shifted(self, delta: float) -> "HalfSpaceProfile":
        return HalfSpaceProfile(self.nu, self.shift + delta, self.amplitude, self.s)

    def with_amplitude(self, amplitude: float) -> "HalfSpaceProfile":
        return HalfSpaceProfile(self.nu, self.shift, amplitude, self.s)

    def to_dict(self) -> dict:
        return {"type": "profile", "nu": list(self.nu), "shift": self.shift,
                "amplitude": self.amplitude, "s": self.s}


@dataclass(frozen=True)
class WedgeProfile:
    """amplitude * (max_k (x.nu_k + shift_k))_+^s.

    Exterior data whose free boundary bends between two half-planes.  It still
    grows exactly like |x|^s at infinity.
    """

    nus: tuple
    shifts: tuple
    amplitude: float
    s: float

    def __post_init__(self):
        object.__setattr__(self, "nus", tuple(tuple(float(c) for c in _unit(v)) for v in self.nus))
        object.__setattr__(self, "shifts", tuple(float(c) for c in self.shifts))

    @property
    def n(self) -> int:
        return len(self.nus[0])

    def _lin(self, x):
        return np.stack([x @ np.asarray(v) + c for v, c in zip(self.nus, self.shifts)], axis=-1)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.amplitude * np.maximum(self._lin(x).max(axis=-1), 0.0) ** self.s

    def asymptotic(self, theta) -> np.ndarray:
        theta = np.atleast_2d(theta)
        q = np.stack([theta @ np.asarray(v) for v in self.nus], axis=-1).max(axis=-1)
        return self.amplitude * np.maximum(q, 0.0) ** self.s

    def breakpoints(self, origins, theta) -> np.ndarray:
        out = []
        lins = [origins @ np.asarray(v) + c for v, c in zip(self.nus, self.shifts)]
        qs = [theta @ np.asarray(v) for v in self.nus]
        with np.errstate(divide="ignore", invalid="ignore"):
            for lin, q in zip(lins, qs):
                out.append(-lin / q)
            out.append(-(lins[0] - lins[1]) / (qs[0] - qs[1]))
        r = np.stack(np.broadcast_arrays(*out), axis=-1)
        return np.where(r > 0, r, np.nan)

    def to_dict(self) -> dict:
        return {"type": "wedge", "nus": [list(v) for v in self.nus], "shifts": list(self.shifts),
                "amplitude": self.amplitude, "s": self.s}


def exterior_from_dict(d: dict):
    kind = d.get("type")
    if kind == "zero":
        return ZeroExterior(int(d.get("n", 2)))
    if kind == "profile":
        return HalfSpaceProfile(tuple(d["nu"]), float(d["shift"]), float(d["amplitude"]), float(d["s"]))
    if kind == "wedge":
        return WedgeProfile(tuple(tuple(v) for v in d["nus"]), tuple(d["shifts"]),
                            float(d["amplitude"]), float(d["s"]))
    raise ValueError(f"cannot rebuild exterior of type {kind!r}")


def eval_profile(p: HalfSpaceProfile, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    vals = p(x)
    return float(vals[0]) if x.ndim == 1 else vals


def halfline_constant(s: float) -> float:
    """(-Delta)^s_R (t_+^s) = halfline_constant(s) * t_-^{-s} for t < 0."""
    return -math.gamma(1 + s) / math.gamma(1 - s)


def _halfline_pv(t: float, s: float, epsabs: float, epsrel: float, limit: int) -> float:
    """p.v. int_R (v(t) - v(tau)) |t - tau|^{-1-2s} dtau for v = tau_+^s."""
    kw = dict(epsabs=epsabs, epsrel=epsrel, limit=limit)
    if t < 0:
        d = -t
        f = lambda tau: -(tau**s) * (tau + d) ** (-1 - 2 * s)
        return integrate.quad(f, 0, d, **kw)[0] + integrate.quad(f, d, np.inf, **kw)[0]
    delta = t / 2
    vt = t**s
    # symmetric window |z| < t/2: integrate the even binomial series termwise
    k = np.arange(2, 120, 2, dtype=float)
    near = -2.0 * float(np.sum(binom(s, k) * t ** (s - k) * delta ** (k - 2 * s) / (k - 2 * s)))
    right = integrate.quad(lambda z: (vt - (t + z) ** s) * z ** (-1 - 2 * s), delta, np.inf, **kw)[0]
    left = integrate.quad(lambda z: (vt - (t - z) ** s) * z ** (-1 - 2 * s), delta, t, **kw)[0]
    left += integrate.quad(lambda z: vt * z ** (-1 - 2 * s), t, np.inf, **kw)[0]
    return near + right + left


def apply_L_to_profile(spec: KernelSpec, p: HalfSpaceProfile, x, quad: SphereQuadrature | None = None,
                       epsabs: float = 1e-11, epsrel: float = 1e-10, limit: int = 200) -> float:
    """L applied to the profile at x, reduced to a line integral along nu.

    For v(x) = phi(x.nu):  L v(x) = [int_S a(theta)|theta.nu|^{2s}] * p.v. int_R (phi(t)-phi(tau))|t-tau|^{-1-2s}.
    """
    x = np.asarray(x, dtype=float).ravel()
    t = float(x @ p.normal + p.shift)
    if t == 0.0:
        raise ValueError("L of the profile is singular on its free hyperplane")
    quad = quad or SphereQuadrature.default(spec.n)
    moment = _moment(spec, p.normal, quad)
    return float(moment * p.amplitude * _halfline_pv(t, p.s, epsabs, epsrel, limit))


def tail(u: Callable[[np.ndarray], np.ndarray], R: float, x0=None, *, s: float, n: int | None = None,
         n_angles: int = 256, per_decade: int = 64, doublings: int | None = None) -> float:
    """R^{2s} int_{|y-x0|>R} |u(y)| |y-x0|^{-n-2s} dy.

    Geometric annuli (two-point Gauss in log r) out to R * 2**doublings; the
    remainder is closed assuming |u| grows like r^s along each ray.  By default the
    annuli extend until that closure is below 1e-8 of the last sampled values.
    """
    if R <= 0:
        raise ValueError("tail radius must be positive")
    if x0 is None:
        if n is None:
            raise ValueError("need x0 or n")
        x0 = np.zeros(n)
    x0 = np.asarray(x0, dtype=float).ravel()
    n = len(x0)
    quad = SphereQuadrature.default(n, n_angles)
    theta, wtheta = quad.nodes, quad.weights

    if doublings is None:
        doublings = max(20, math.ceil(18.5 / (2 * s * math.log(2.0))))
    span = doublings * math.log(2.0)
    n_ann = max(1, int(math.ceil(per_decade * span / math.log(10.0))))
    edges = np.linspace(0.0, span, n_ann + 1)
    g, gw = np.polynomial.legendre.leggauss(2)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
    tau = (mid[:, None] + half[:, None] * g).ravel()
    wtau = (half[:, None] * gw).ravel()
    r = R * np.exp(tau)

    pts = x0 + r[:, None, None] * theta[None, :, :]
    vals = np.abs(np.asarray(u(pts.reshape(-1, n)), dtype=float)).reshape(len(r), len(theta))
    if not np.all(np.isfinite(vals)):
        raise DivergenceError("non-finite values in tail quadrature")
    weight = (wtau * np.exp(-2 * s * tau))[:, None] * wtheta[None, :]
    body = math.fsum((weight * vals).ravel())

    # growth check: log-slope of the angular mean over the last decade
    ang = vals @ wtheta
    j = int(np.searchsorted(tau, tau[-1] - math.log(10.0)))
    if ang[j] > 0 and ang[-1] > 0:
        slope = math.log(ang[-1] / ang[j]) / (tau[-1] - tau[j])
        if slope >= 2 * s - 1e-6:
            raise DivergenceError(f"integrand grows like r^{slope:.3g}, not integrable against r^(-n-2s)")
    rmax = R * math.exp(span)
    edge = np.abs(np.asarray(u(x0 + rmax * theta), dtype=float))
    closure = float(np.dot(wtheta, edge)) * math.exp(-2 * s * span) / s
    return body + closure
