"""Projected accelerated descent on the discrete energy with volume smoothing continuation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyModel, Field, energy_model

__all__ = [
    "SolveConfig",
    "SolveReport",
    "StagnationError",
    "minimize",
    "certify_minimality",
    "default_competitors",
    "project",
]

log = logging.getLogger(__name__)

SNAP = 1e-14


class StagnationError(RuntimeError):
    """A full inner loop made no progress while the stopping test still failed."""


@dataclass(frozen=True)
class SolveConfig:
    max_outer: int = 8
    max_inner: int = 4000
    shrink: float = 0.5  # backtracking step shrink
    armijo: float = 1e-4  # sufficient decrease constant
    tol_grad: float = 1e-7  # sup-norm of the projected step, in units of u
    delta0: float | None = None  # default 2 h^s
    delta_shrink: float = 0.5
    restarts: int = 3
    noise: float = 0.05
    seed: int = 0
    boundary_moves: bool = True

    def __post_init__(self):
        if not (0 < self.shrink < 1 and 0 < self.delta_shrink < 1):
            raise ValueError("shrink factors must lie in (0, 1)")
        if min(self.tol_grad, self.armijo, self.max_outer, self.max_inner) <= 0:
            raise ValueError("tolerances and iteration counts must be positive")
        if self.delta0 is not None and self.delta0 <= 0:
            raise ValueError("delta0 must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")


@dataclass
class SolveReport:
    field: Field
    trace: list = field(default_factory=list)  # (attempt, outer, inner, delta, smoothed energy)
    certification: list = field(default_factory=list)  # (name, gap)
    converged: bool = False
    energy: float = float("nan")
    final_delta: float = float("nan")
    grad_norm: float = float("nan")
    attempts: list = field(default_factory=list)  # sharp energy of each attempt

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "energy": self.energy,
            "final_delta": self.final_delta,
            "grad_norm": self.grad_norm,
            "attempts": self.attempts,
            "certification": [{"name": n, "gap": g} for n, g in self.certification],
            "iterations": len(self.trace),
        }


def project(u: np.ndarray, mask: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Nonnegativity on Omega, exterior data on the frame, tiny values snapped to zero."""
    v = np.where(mask, np.maximum(u, 0.0), g)
    v[mask & (v < SNAP)] = 0.0
    return v


def _smoothed(model: EnergyModel, u: np.ndarray, delta: float) -> float:
    inter, far = model.interaction(u)
    return inter + far + model.volume(u, delta)


def _full_grad(model: EnergyModel, u: np.ndarray, delta: float) -> np.ndarray:
    # chi_delta is concave, so its right derivative at 0 keeps the linearization an upper bound
    g = model.gradient(u)
    return g + np.where(model.mask & (u < delta), model.hn / delta, 0.0)


def _descend(model: EnergyModel, u: np.ndarray, delta: float, cfg: SolveConfig, trace: list, tag: tuple):
    """Accelerated projected gradient with monotone restart at fixed delta."""
    mask, g_ext = model.mask, model.g
    L = model.lipschitz()
    t = 1.0 / L
    x = u.copy()
    y = x.copy()
    fx = _smoothed(model, x, delta)
    f_start = fx
    momentum = 1.0
    pg = math.inf
    for k in range(cfg.max_inner):
        gy = _full_grad(model, y, delta)
        fy = _smoothed(model, y, delta)
        while True:
            xn = project(y - t * gy, mask, g_ext)
            d = xn - y
            fn = _smoothed(model, xn, delta)
            # majorization test; it always holds for t <= 1/L
            if fn <= fy + float(np.sum(gy * d)) + 0.5 / t * float(np.sum(d * d)) + 1e-15 * abs(fy) or t < 1e-6 / L:
                break
            t *= cfg.shrink
        if fn > fx:
            # monotone restart: drop momentum and take a plain projected step from x
            gx = _full_grad(model, x, delta)
            xn = project(x - t * gx, mask, g_ext)
            fn = _smoothed(model, xn, delta)
            momentum = 1.0
            y = xn.copy()
        else:
            m_next = 0.5 * (1 + math.sqrt(1 + 4 * momentum**2))
            y = project(xn + ((momentum - 1) / m_next) * (xn - x), mask, g_ext)
            momentum = m_next
        pg = float(np.max(np.abs(xn - x))) if xn.size else 0.0
        x, fx = xn, fn
        trace.append(tag + (k, delta, fx))
        if pg <= cfg.tol_grad:
            break
    # stopping quantity: projected gradient step from the final iterate
    gx = _full_grad(model, x, delta)
    pg = float(np.max(np.abs(project(x - gx / L, mask, g_ext) - x)))
    if pg > cfg.tol_grad and not fx < f_start:
        raise StagnationError(
            f"no decrease over {cfg.max_inner} steps at delta={delta:.3g}: energy {fx:.6g}, projected step {pg:.3g}")
    return x, pg


def _neighbours(mask: np.ndarray) -> np.ndarray:
    """Nodes with an axis neighbour in `mask`."""
    out = np.zeros_like(mask)
    for ax in range(mask.ndim):
        out |= np.roll(mask, 1, ax) | np.roll(mask, -1, ax)
    return out


def _sharp(model: EnergyModel, u: np.ndarray) -> float:
    return model.energy(u).total


def _boundary_moves(model: EnergyModel, u: np.ndarray, cfg: SolveConfig, delta: float, trace: list,
                    tag: tuple, max_rounds: int = 400):
    """Discrete domain variations of the positivity set.

    Descent on the smoothed volume term cannot move a free boundary through
    many cells once delta is small: zero nodes stay zero and boundary layers
    stay positive.  Here whole boundary layers are removed or added (and,
    separately, single boundary nodes flipped where the exact quadratic model
    says it pays), each trial is relaxed by descent, and a trial is kept only
    if the sharp energy decreases.
    """
    mask, hn = model.mask, model.hn
    diag = 4 * model.rowsum + 4 * hn * model.k0
    e = _sharp(model, u)
    pos_full = lambda v: (v > 0) | ~mask
    for rnd in range(max_rounds):
        pos = u > 0
        inner_pos = pos & mask
        grad = model.gradient(u)
        trials = []
        # single-node flips predicted to lower the sharp energy
        drop = inner_pos & _neighbours(~pos_full(u) & mask) & (-grad * u + 0.5 * diag * u**2 - hn < 0)
        vstar = np.where(diag > 0, -grad / np.where(diag > 0, diag, 1.0), 0.0)
        grow = mask & ~pos & _neighbours(inner_pos) & (grad < 0) & (-0.5 * grad * vstar + hn < 0)
        if drop.any() or grow.any():
            trials.append(np.where(drop, 0.0, np.where(grow, vstar, u)))
        layer = inner_pos & _neighbours(~pos & mask)
        if layer.any():
            trials.append(np.where(layer, 0.0, u))
        ring = mask & ~pos & _neighbours(inner_pos)
        if ring.any():
            fill = np.maximum(vstar, delta)
            trials.append(np.where(ring, fill, u))
        best = None
        for v in trials:
            v, _ = _descend(model, project(v, mask, model.g), delta, cfg, trace, tag)
            ev = _sharp(model, v)
            if ev < e - 1e-13 * abs(e) and (best is None or ev < best[0]):
                best = (ev, v)
        if best is None:
            break
        e, u = best
    return u


def _solve_once(model: EnergyModel, u0: np.ndarray, cfg: SolveConfig, delta0: float, trace: list, attempt: int):
    u = project(u0, model.mask, model.g)
    delta = delta0
    pg = math.inf
    for outer in range(cfg.max_outer):
        u, pg = _descend(model, u, delta, cfg, trace, (attempt, outer))
        log.debug("attempt %d level %d delta %.3g energy %.8g pg %.2g", attempt, outer, delta,
                  _smoothed(model, u, delta), pg)
        if outer < cfg.max_outer - 1:
            delta *= cfg.delta_shrink
    if cfg.boundary_moves:
        u = _boundary_moves(model, u, cfg, delta, trace, (attempt, cfg.max_outer))
        gx = _full_grad(model, u, delta)
        pg = float(np.max(np.abs(project(u - gx / model.lipschitz(), model.mask, model.g) - u)))
    return u, pg, delta


def minimize(spec, u0: Field, cfg: SolveConfig | None = None, certify: bool = True,
             competitors: dict | None = None) -> SolveReport:
    """Minimize the energy over nonnegative fields agreeing with u0 off Omega."""
    cfg = cfg or SolveConfig()
    model = energy_model(spec, u0.grid, u0.omega, u0.exterior)
    frame_before = u0.values[~model.mask].copy()
    if not np.array_equal(frame_before, model.g[~model.mask]):
        raise ValueError("initial field does not carry the exterior data on the frame")
    if np.any(u0.values < 0):
        raise ValueError("initial field has negative values")
    delta0 = cfg.delta0 if cfg.delta0 is not None else 2 * u0.grid.h**spec.s
    rng = np.random.Generator(np.random.Philox(cfg.seed))

    trace: list = []
    e0 = model.energy(u0.values).total
    best, best_pg, best_delta = _solve_once(model, u0.values, cfg, delta0, trace, 0)
    best_e = model.energy(best).total
    attempts = [best_e]
    for a in range(1, cfg.restarts + 1):
        noise = 1 + cfg.noise * rng.uniform(-1, 1, size=best.shape)
        start = np.where(model.mask, best * noise, best)
        u, pg, dl = _solve_once(model, start, cfg, delta0, trace, a)
        e = model.energy(u).total
        attempts.append(e)
        if e < best_e:
            best, best_pg, best_delta, best_e = u, pg, dl, e
    if best_e > e0:
        # the smoothed problem drifted above the start in sharp energy; keep the start
        best, best_e = project(u0.values, model.mask, model.g), e0
        best_pg = float("nan")

    out = u0.with_values(best)
    if not np.array_equal(out.values[~model.mask], frame_before):
        raise AssertionError("exterior nodes were modified")
    report = SolveReport(out, trace, [], bool(best_pg <= cfg.tol_grad), best_e, best_delta, best_pg, attempts)
    if certify:
        report.certification = certify_minimality(spec, out, competitors)
    return report


# -- certification ------------------------------------------------------------

def _inside(u: Field, values: np.ndarray) -> Field:
    m = u.mask
    return u.with_values(np.where(m, np.maximum(values, 0.0), u.values))


def default_competitors(spec, u: Field, profile=None) -> dict:
    """Named competitors that agree with u off Omega."""
    grid, h = u.grid, u.grid.h
    x = grid.points()
    vals = u.values
    inner = vals[u.mask]
    top = float(inner.max()) if inner.size else 0.0
    comps: dict = {"identity": u.with_values(vals)}
    for frac in (0.01, 0.05):
        comps[f"truncate_{frac:g}"] = _inside(u, np.maximum(vals - frac * top, 0.0))
    for axis in range(u.n):
        for sign in (1, -1):
            e = np.zeros(u.n)
            e[axis] = sign * h
            comps[f"translate_{'+-'[sign < 0]}e{axis + 1}"] = _inside(u, u.evaluate(x - e))
    p = profile if profile is not None else u.exterior
    nu = np.asarray(getattr(p, "nu", getattr(p, "nus", [[1.0] + [0.0] * (u.n - 1)])[0]), dtype=float)
    for k in (2, -2):
        shifted = np.asarray(p(x.reshape(-1, u.n) + k * h * nu)).reshape(grid.shape)
        comps[f"min_profile_{k:+d}h"] = _inside(u, np.minimum(vals, shifted))
        comps[f"max_profile_{k:+d}h"] = _inside(u, np.maximum(vals, shifted))
    c = 0.5 * (np.asarray(u.omega[0]) + np.asarray(u.omega[1]))
    for lam in (0.98, 1.02):
        comps[f"dilate_{lam:g}"] = _inside(u, u.evaluate(c + (x - c) / lam))
    comps["amplitude_1.5"] = _inside(u, 1.5 * vals)
    return comps


def certify_minimality(spec, u: Field, competitors: dict | None = None, profile=None) -> list:
    """[(name, I(v) - I(u))] over the competitor suite."""
    model = energy_model(spec, u.grid, u.omega, u.exterior)
    comps = competitors if competitors is not None else default_competitors(spec, u, profile)
    base = model.energy(u.values).total
    out = []
    for name, v in comps.items():
        if not np.array_equal(v.values[~model.mask], u.values[~model.mask]):
            raise ValueError(f"competitor {name!r} modifies exterior nodes")
        out.append((name, model.energy(v.values).total - base))
    return out


def certification_tolerance(energy: float) -> float:
    return 1e-3 * abs(energy)
