"""Named reproducible scenarios: configuration, artifacts, and pass/fail contracts."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import analysis as An
from . import energy as E
from . import halfspace as H
from . import kernel as K
from . import minimize as M
from . import plots
from .config import Config, parse_config

__all__ = [
    "Contract",
    "Scenario",
    "SCENARIOS",
    "run_scenario",
    "scenario_names",
    "solve_2d",
    "solve_1d",
    "default_out_root",
]

log = logging.getLogger(__name__)


@dataclass
class Contract:
    name: str
    passed: bool
    measured: object
    threshold: object
    note: str = ""


@dataclass
class Scenario:
    name: str
    run: Callable
    defaults: dict  # section -> {key: default raw string}
    summary: str

    def schema(self) -> dict:
        return {sec: set(keys) for sec, keys in self.defaults.items()}


class Context:
    """Per-run state: resolved configuration, seeded generator, artifact writers."""

    def __init__(self, scenario: Scenario, cfg: Config, out: Path, seed: int, cache: Path | None):
        merged = {sec: dict(keys) for sec, keys in scenario.defaults.items()}
        for sec, keys in cfg.sections.items():
            merged.setdefault(sec, {}).update(keys)
        self.cfg = Config(merged, cfg.lines, cfg.source)
        self.scenario = scenario
        self.out = out
        self.seed = int(seed)
        self.rng = np.random.Generator(np.random.Philox(self.seed))
        self.cache = cache
        self.contracts: list[Contract] = []
        self.artifacts: list[str] = []
        self.info: dict = {}

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def csv(self, name: str, header: list, rows) -> Path:
        p = self.path(name)
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["# seed", self.seed])
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        return p

    def save_field(self, name: str, u: E.Field) -> None:
        u.save(self.out / name)
        self.artifacts += [name + ".bin", name + ".json"]

    def json(self, name: str, obj) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
        return p

    def check(self, name: str, passed: bool, measured, threshold, note: str = "") -> bool:
        self.contracts.append(Contract(name, bool(passed), _jsonable(measured), _jsonable(threshold), note))
        return bool(passed)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def default_out_root() -> Path:
    return Path(os.environ.get("NLOP_OUT", "nlop-out"))


# -- shared builders ---------------------------------------------------------------

def _kernel(ctx: Context, s: float | None = None, density: str | None = None) -> K.KernelSpec:
    c = ctx.cfg
    sec = {"s": s if s is not None else c.get_float("kernel", "s"),
           "dim": c.get_int("kernel", "dim"),
           "density": density if density is not None else c.get_str("kernel", "density")}
    try:
        return K.kernel_from_config(sec)
    except ValueError as exc:
        raise c.error(str(exc), "kernel", "density") from exc


def _unit_angle(deg: float) -> tuple:
    a = math.radians(deg)
    return (math.cos(a), math.sin(a))


def _solve_cfg(ctx: Context) -> M.SolveConfig:
    c = ctx.cfg
    try:
        return M.SolveConfig(max_outer=c.get_int("solve", "max_outer"), max_inner=c.get_int("solve", "max_inner"),
                             tol_grad=c.get_float("solve", "tol_grad"), restarts=c.get_int("solve", "restarts"),
                             noise=c.get_float("solve", "noise"), seed=ctx.seed,
                             boundary_moves=c.get_bool("solve", "boundary_moves"))
    except ValueError as exc:
        raise c.error(str(exc), "solve") from exc


def _cached_solve(ctx: Context, tag: str, build: Callable) -> tuple[E.Field, dict]:
    """Solve once per (configuration, seed) and reuse the field across scenarios."""
    keyed = {sec: ctx.cfg.section(sec) for sec in ("kernel", "domain", "exterior", "seed", "solve")}
    key = hashlib.sha256(json.dumps([tag, keyed, ctx.seed], sort_keys=True).encode()).hexdigest()[:16]
    prefix = ctx.cache / f"{tag}-{key}" if ctx.cache is not None else None
    if prefix is not None and Path(str(prefix) + ".json").exists():
        meta = json.loads(Path(str(prefix) + ".report.json").read_text())
        return E.Field.load(prefix), meta
    field_, meta = build()
    if prefix is not None:
        tmp = prefix.with_name(prefix.name + f".tmp{os.getpid()}")
        field_.save(tmp)
        Path(str(tmp) + ".report.json").write_text(json.dumps(_jsonable(meta), sort_keys=True))
        for ext in (".bin", ".report.json", ".json"):  # sidecar last marks completion
            os.replace(str(tmp) + ext, str(prefix) + ext)
    return field_, meta


def solve_2d(ctx: Context) -> tuple[K.KernelSpec, E.Field, dict]:
    """Minimizer with wedge exterior data, seeded by the half-plane at the mean angle."""
    spec = _kernel(ctx)
    c = ctx.cfg

    def build():
        hw, nodes, om = c.get_float("domain", "half_width"), c.get_int("domain", "nodes"), c.get_float("domain", "omega")
        angles = c.get_floats("exterior", "angles")
        if len(angles) not in (1, 2):
            raise c.error("exterior angles must list one or two directions", "exterior", "angles")
        nus = [_unit_angle(a) for a in angles]
        A = K.free_boundary_constant_A(spec, nus[0])
        ext = H.WedgeProfile(tuple(nus), (0.0,) * len(nus), A, spec.s) if len(nus) == 2 else \
            H.HalfSpaceProfile(nus[0], 0.0, A, spec.s)
        seed = H.HalfSpaceProfile(_unit_angle(float(np.mean(angles))), c.get_float("seed", "shift"), A, spec.s)
        grid = E.Grid.cube(hw, nodes, 2)
        u0 = E.Field.from_exterior(grid, ((-om, -om), (om, om)), ext, spec.s, inside=seed)
        t0 = time.perf_counter()
        rep = M.minimize(spec, u0, _solve_cfg(ctx), certify=False)
        meta = rep.to_dict()
        meta["solve_seconds"] = time.perf_counter() - t0
        return rep.field, meta

    u, meta = _cached_solve(ctx, "solve2d", build)
    return spec, u, meta


def solve_1d(ctx: Context) -> tuple[K.KernelSpec, E.Field, M.SolveReport, H.HalfSpaceProfile]:
    spec = _kernel(ctx)
    c = ctx.cfg
    hw, nodes, om = c.get_float("domain", "half_width"), c.get_int("domain", "nodes"), c.get_float("domain", "omega")
    A = K.free_boundary_constant_A(spec, [1.0])
    ext = H.HalfSpaceProfile((1.0,), 0.0, A, spec.s)
    start = H.HalfSpaceProfile((1.0,), c.get_float("seed", "shift"), c.get_float("seed", "amplitude") * A, spec.s)
    grid = E.Grid((-hw,), (hw,), (nodes,))
    u0 = E.Field.from_exterior(grid, ((-om,), (om,)), ext, spec.s, inside=start)
    noise = c.get_float("seed", "noise")
    pert = 1.0 + noise * ctx.rng.uniform(-1.0, 1.0, size=grid.shape)
    u0 = u0.with_values(np.where(u0.mask, u0.values * pert, u0.values))
    rep = M.minimize(spec, u0, _solve_cfg(ctx), certify=True, competitors=None)
    return spec, rep.field, rep, ext


_SOLVE_DEFAULTS = {"max_outer": "8", "max_inner": "4000", "tol_grad": "1e-7", "restarts": "0", "noise": "0.05",
                   "boundary_moves": "true"}
_KERNEL_2D = {"dim": "2", "s": "0.5", "density": "frac_laplacian"}
_DOMAIN_2D = {"half_width": "1.0", "nodes": "192", "omega": "0.5"}
_EXTERIOR_2D = {"angles": "5, 40"}  # degrees; two angles give a wedge, one a half-plane
_SEED_2D = {"shift": "0.0"}


# -- scenarios ---------------------------------------------------------------------

def _kernel_constants(ctx: Context) -> None:
    c = ctx.cfg
    m = c.get_int("diagnostics", "directions")
    tol = c.get_float("diagnostics", "tolerance")
    density = c.get_str("kernel", "density")
    angles = 2 * math.pi * np.arange(m) / m
    rows, polar, worst = [], {}, 0.0
    for s in c.get_floats("kernel", "s_values"):
        spec = _kernel(ctx, s=s)
        expected = 1.0 / math.gamma(1 + s) if density == "frac_laplacian" else float("nan")
        vals = []
        for a in angles:
            nu = np.array([math.cos(a), math.sin(a)]) if spec.n == 2 else np.array([math.copysign(1.0, math.cos(a))])
            A, B = K.free_boundary_constant_A(spec, nu), K.direction_constant_B(spec, nu)
            rel = abs(A - expected) / expected
            worst = max(worst, rel) if math.isfinite(rel) else worst
            vals.append(A)
            rows.append([s, a, *([nu[0], nu[1]] if spec.n == 2 else [nu[0], 0.0]), A, B, expected, rel])
        polar[f"s={s:g}"] = (angles, np.array(vals))
    ctx.csv("constants.csv", ["s", "angle", "nu_x", "nu_y", "A", "B", "A_expected", "rel_err"], rows)
    plots.polar(ctx.path("A_polar.svg"), polar, title=f"A(nu), {density}")
    if density == "frac_laplacian":
        ctx.check("A_equals_inverse_gamma", worst < tol, worst, tol,
                  f"max relative error over {m} directions and all s")
    if c.get_bool("diagnostics", "oracle"):
        otol = c.get_float("diagnostics", "oracle_tolerance")
        orows, oworst = [], 0.0
        order = c.get_int("diagnostics", "oracle_order")
        for s in c.get_floats("diagnostics", "oracle_s_values"):
            # isotropic 1D kernel with density 1/(2 c_{1,s}) reproduces the 1D fractional Laplacian
            amp = K.first_variation_amplitude(s, 0.5 * K.frac_laplacian_constant(1, s), plateau=(0.2, 0.9),
                                              npts=order)
            exp_ = 1.0 / math.gamma(1 + s)
            orows.append([s, amp, exp_, abs(amp - exp_) / exp_])
            oworst = max(oworst, abs(amp - exp_) / exp_)
        ctx.csv("normalization_oracle.csv", ["s", "first_variation_amplitude", "inverse_gamma", "rel_err"], orows)
        ctx.check("normalization_oracle", oworst < otol, oworst, otol,
                  "amplitude with vanishing one-sided shape derivative of the 1D energy")


def _aniso_sweep(ctx: Context) -> None:
    c = ctx.cfg
    m = c.get_int("diagnostics", "directions")
    angles = 2 * math.pi * np.arange(m) / m
    rows, polar = [], {}
    for dens in c.get_strs("kernel", "densities"):
        spec = _kernel(ctx, density=dens)
        A = np.array([K.free_boundary_constant_A(spec, [math.cos(a), math.sin(a)]) for a in angles])
        polar[dens] = (angles, A)
        rows += [[dens, a, v] for a, v in zip(angles, A)]
        if dens in ("isotropic", "frac_laplacian"):
            spread = float((A.max() - A.min()) / A.mean())
            ctx.check(f"constant_row_{dens}", spread < 1e-10, spread, 1e-10, "rotation invariance")
        half = m // 2
        sym = float(np.max(np.abs(A[:half] - A[half:2 * half])) / A.mean()) if m % 2 == 0 else 0.0
        ctx.check(f"even_symmetry_{dens}", sym < 1e-12, sym, 1e-12, "A(nu) = A(-nu)")
    ctx.csv("aniso_sweep.csv", ["density", "angle", "A"], rows)
    plots.polar(ctx.path("A_polar.svg"), polar, title="A(nu) by kernel")


def _operator_identity(ctx: Context) -> None:
    c = ctx.cfg
    npts = c.get_int("diagnostics", "points")
    t_min, t_max = c.get_float("diagnostics", "t_min"), c.get_float("diagnostics", "t_max")
    ptol, ntol = c.get_float("diagnostics", "positive_tolerance"), c.get_float("diagnostics", "negative_tolerance")
    ts = np.geomspace(t_min, t_max, npts)
    rows, pworst, nworst = [], 0.0, 0.0
    series = {}
    for s in c.get_floats("kernel", "s_values"):
        spec = _kernel(ctx, s=s)
        for deg in c.get_floats("diagnostics", "directions"):
            nu = _unit_angle(deg) if spec.n == 2 else (1.0,)
            p = H.HalfSpaceProfile(nu, 0.0, 1.0, s)
            B = K.direction_constant_B(spec, np.asarray(nu))
            neg = []
            for t in ts:
                vp = H.apply_L_to_profile(spec, p, t * np.asarray(nu))
                vn = H.apply_L_to_profile(spec, p, -t * np.asarray(nu))
                expected = H.halfline_constant(s) * B * t ** (-s)
                rel = abs(vn - expected) / abs(expected)
                pworst, nworst = max(pworst, abs(vp)), max(nworst, rel)
                rows.append([s, deg, t, vp, vn, expected, rel])
                neg.append(-vn)
            series[f"s={s:g}, {deg:g} deg"] = (ts, np.array(neg))
    ctx.csv("operator_identity.csv",
            ["s", "direction_deg", "t", "L_positive_side", "L_negative_side", "expected_negative", "rel_err"], rows)
    plots.loglog(ctx.path("operator_identity.svg"), series, xlabel="distance to the free hyperplane",
                 ylabel="-L(profile) on the zero side")
    ctx.check("vanishes_on_positive_side", pworst < ptol, pworst, ptol, f"{npts} points per (s, direction)")
    ctx.check("negative_side_closed_form", nworst < ntol, nworst, ntol,
              "expected = -Gamma(1+s)/Gamma(1-s) * B(nu) * |t|^(-s) for the unit-amplitude profile")


def _energy_identities(ctx: Context) -> None:
    c = ctx.cfg
    spec = _kernel(ctx)
    pairs, nodes = c.get_int("diagnostics", "pairs"), c.get_int("diagnostics", "nodes")
    tol = c.get_float("diagnostics", "tolerance")
    grid = E.Grid.cube(1.0, nodes, spec.n)
    om = c.get_float("diagnostics", "omega")
    omega = ((-om,) * spec.n, (om,) * spec.n)
    rows, worst = [], 0.0
    for k in range(pairs):
        fs = []
        for _ in range(2):
            vals = np.maximum(ctx.rng.standard_normal(grid.shape), 0.0)
            f = E.Field(grid, vals, omega, H.ZeroExterior(spec.n), spec.s)
            fs.append(f.with_values(np.where(f.mask, vals, 0.0)))
        r = E.minmax_identity_check(spec, fs[0], fs[1])
        worst = max(worst, r)
        rows.append([k, r])
    ctx.csv("minmax_identity.csv", ["pair", "relative_residual"], rows)
    ctx.check("minmax_identity", worst < tol, worst, tol, f"{pairs} random {nodes}^{spec.n} field pairs")

    # energy growth of the profile in balls: homogeneity gives |u|_{H^s(B_R)}^2 ~ R^n
    radii = c.get_floats("diagnostics", "scaling_radii")
    g2 = E.Grid.cube(c.get_float("diagnostics", "scaling_half_width"), c.get_int("diagnostics", "scaling_nodes"), spec.n)
    nu = tuple([1.0] + [0.0] * (spec.n - 1))
    prof = H.HalfSpaceProfile(nu, 0.0, K.free_boundary_constant_A(spec, nu), spec.s)
    u = E.Field.from_exterior(g2, ((-1.0,) * spec.n, (1.0,) * spec.n), prof, spec.s)
    semi = np.array([E.hs_seminorm(u, E.Ball((0.0,) * spec.n, R)) ** 2 for R in radii])
    slope, icept = np.polyfit(np.log(radii), np.log(semi), 1)
    ctx.csv("energy_scaling.csv", ["R", "seminorm_squared", "ratio_to_R^n"],
            [[R, v, v / R**spec.n] for R, v in zip(radii, semi)])
    plots.loglog(ctx.path("energy_scaling.svg"), {"profile": (radii, semi)}, {"profile": (slope, icept)},
                 xlabel="R", ylabel="seminorm^2 on B_R")
    band = c.get_float("diagnostics", "scaling_band")
    ctx.check("energy_scaling_exponent", abs(slope - spec.n) <= band, float(slope), [spec.n - band, spec.n + band],
              "homogeneous profile: exponent n")


def _halfspace_1d(ctx: Context) -> None:
    c = ctx.cfg
    spec, u, rep, ext = solve_1d(ctx)
    h = u.grid.h
    ctx.save_field("field", u)
    u.to_csv(ctx.path("field.csv"))
    sup = float(np.max(np.abs(u.values - ext(u.grid.points().reshape(-1, 1)))))
    bound = c.get_float("diagnostics", "sup_factor") * h**spec.s
    ctx.check("sup_distance_to_profile", sup <= bound, sup, bound, "3 h^s")
    geo = An.extract_boundary(u)
    A = ext.amplitude
    x0 = geo.points[int(np.argmin(np.abs(geo.points[:, 0])))]
    trace = An.trace_u_over_ds(u, geo, x0)
    ttol = c.get_float("diagnostics", "trace_tolerance")
    ctx.check("trace_u_over_d^s", abs(trace / A - 1) <= ttol, trace / A, [1 - ttol, 1 + ttol], "relative to A")
    ctol = c.get_float("diagnostics", "certification")
    gaps = rep.certification
    worst = min(g for _, g in gaps)
    thr = -ctol * abs(rep.energy)
    ctx.check("competitor_certification", worst >= thr, worst, thr, "min over the competitor suite of I(v) - I(u)")
    ctx.csv("certification.csv", ["competitor", "gap"], gaps)
    ctx.json("solve_report.json", rep.to_dict())
    ctx.info.update(free_boundary=float(x0[0]), trace=trace, A=A)


def _boundary_point(u: E.Field):
    geo = An.extract_boundary(u)
    centre = 0.5 * (np.asarray(u.omega[0]) + np.asarray(u.omega[1]))
    x0, nu = An.nearest_boundary_point(geo, centre)
    return geo, x0, nu


def _halfspace_2d(ctx: Context) -> None:
    c = ctx.cfg
    spec, u, meta = solve_2d(ctx)
    ctx.save_field("field", u)
    ctx.json("solve_report.json", meta)
    geo, x0, nu = _boundary_point(u)
    lo, hi = c.get_floats("diagnostics", "density_band")
    dens = [(R, An.density_ratio(u, x0, R)) for R in c.get_floats("diagnostics", "density_radii")]
    ok = all(lo <= d <= hi for _, d in dens)
    ctx.check("density_ratio", ok, [d for _, d in dens], [lo, hi])
    gfit = An.growth_exponents(u, x0, c.get_floats("diagnostics", "growth_radii"))
    band = c.get_float("diagnostics", "growth_band")
    ctx.check("growth_exponent", not gfit.degenerate and abs(gfit.slope - spec.s) <= band, gfit.slope,
              [spec.s - band, spec.s + band])
    radii = c.get_floats("diagnostics", "tail_radii")
    tails = [H.tail(u.evaluate, R, x0, s=spec.s) / R**spec.s for R in radii]
    spread = max(tails) / min(tails) - 1.0
    tband = c.get_float("diagnostics", "tail_band")
    ctx.check("tail_over_R^s_constant", spread <= tband, spread, tband, "max/min - 1 over the dyadic radii")
    A = K.free_boundary_constant_A(spec, nu)
    trace = An.trace_u_over_ds(u, geo, x0)
    ttol = c.get_float("diagnostics", "trace_tolerance")
    ctx.check("trace_u_over_d^s", abs(trace / A - 1) <= ttol, trace / A, [1 - ttol, 1 + ttol], "relative to A(nu)")
    ctx.csv("density.csv", ["R", "density_ratio"], dens)
    ctx.csv("growth.csv", ["r", "sup_u"], list(zip(gfit.radii, gfit.sups)))
    ctx.csv("tail.csv", ["R", "tail_over_R^s"], list(zip(radii, tails)))
    icept = float(np.mean(np.log(gfit.sups) - gfit.slope * np.log(gfit.radii)))
    plots.loglog(ctx.path("growth.svg"), {"sup u on B_r(x0)": (gfit.radii, gfit.sups)},
                 {"sup u on B_r(x0)": (gfit.slope, icept)}, xlabel="r", ylabel="sup u")
    plots.polylines(ctx.path("boundary.svg"), {"free boundary": geo.points, "x0": x0[None]}, box=u.omega)
    ctx.info.update(x0=x0, normal=nu, trace=trace, A=A, growth=asdict(gfit), graph_fit=geo.graph_fit)


def _flatness_decay(ctx: Context) -> None:
    c = ctx.cfg
    spec, u, meta = solve_2d(ctx)
    geo, x0, nu = _boundary_point(u)
    scales = c.get_floats("diagnostics", "scales")
    rep = An.flatness_report(spec, u, x0, nu, scales, nodes=c.get_int("diagnostics", "blowup_nodes"))
    ctx.json("flatness_report.json", rep.to_dict())
    ratio = [T / e if e > 0 else float("inf") for e, T in zip(rep.epsilons, rep.tails)]
    ctx.csv("flatness.csv", ["r", "eps", "T_eps", "T_over_eps", "nu_x", "nu_y"],
            [[r, e, T, q, *v] for r, e, T, q, v in zip(rep.scales, rep.epsilons, rep.tails, ratio, rep.nus)])
    factor = c.get_float("diagnostics", "decay_factor")
    floor = rep.noise_floor
    eps = rep.epsilons
    for k in range(len(eps) - 1):
        bound = factor * eps[k] + floor
        ctx.check(f"eps_decay_{scales[k]:g}_to_{scales[k + 1]:g}", eps[k + 1] <= bound, eps[k + 1], bound,
                  f"{factor:g} eps(r_k) + h^s")
    delta0 = ratio[0]
    for r, e, T in zip(rep.scales, rep.epsilons, rep.tails):
        ctx.check(f"tail_bound_{r:g}", T <= delta0 * e * (1 + 1e-12), T, delta0 * e,
                  "delta0 = T/eps measured at the first scale")
    plots.lines(ctx.path("flatness.svg"), {"eps": (rep.scales, rep.epsilons), "T_eps": (rep.scales, rep.tails)},
                xlabel="blow-up radius r", ylabel="value", logx=True, logy=True)
    ctx.info.update(x0=x0, delta0=delta0, noise_floor=floor)


def _classify_2d(ctx: Context) -> None:
    c = ctx.cfg
    spec, u, meta = solve_2d(ctx)
    geo, x0, nu = _boundary_point(u)
    sampler = An.BoundarySampler(u, geo)
    rows, dists = [], []
    for r in c.get_floats("diagnostics", "scales"):
        ur = An.blowup(u, x0, r, nodes=c.get_int("diagnostics", "blowup_nodes"), sampler=sampler)
        bnu, shift, d = An.best_profile_fit(ur, nu, spec)
        rows.append([r, d, bnu[0], bnu[1], shift])
        dists.append(d)
    ctx.csv("blowup_distance.csv", ["r", "sup_distance", "nu_x", "nu_y", "shift"], rows)
    mono = all(b < a for a, b in zip(dists, dists[1:]))
    ctx.check("blowup_distance_decreasing", mono, dists, "strictly decreasing in r")

    h = u.grid.h
    t = c.get_float("diagnostics", "translation_cells") * h
    ball = ((0.0, 0.0), c.get_float("diagnostics", "ball_radius"))
    tol = c.get_float("diagnostics", "product_tolerance")
    m = c.get_int("diagnostics", "directions")
    prow = []
    for k in range(m):
        a = 2 * math.pi * k / m
        p, q = An.translation_monotonicity_product(u, (math.cos(a), math.sin(a)), t, ball)
        ratio = p * q / (p + q) ** 2 if p + q > 0 else 0.0
        prow.append([math.degrees(a), p, q, p * q, ratio])
        ctx.check(f"monotonicity_product_{math.degrees(a):g}deg", ratio <= tol, ratio, tol,
                  "product / (plus + minus)^2")
    ctx.csv("monotonicity_products.csv", ["direction_deg", "plus_mass", "minus_mass", "product", "ratio"], prow)
    plots.lines(ctx.path("blowup_distance.svg"), {"sup distance": ([r[0] for r in rows], dists)},
                xlabel="blow-up radius r", ylabel="sup distance to best profile", logx=True)
    ctx.info.update(x0=x0, translation=t)


def _monotonicity_scaling(ctx: Context) -> None:
    c = ctx.cfg
    spec = _kernel(ctx)
    R = c.get_float("diagnostics", "radius")
    nu = _unit_angle(c.get_float("diagnostics", "direction_deg"))
    A = K.free_boundary_constant_A(spec, nu)
    prof = H.HalfSpaceProfile(nu, 0.0, A, spec.s)
    ts = c.get_floats("diagnostics", "ts")
    res = An.monotonicity_excess(spec, prof, R, nu, ts, nodes=c.get_int("diagnostics", "nodes"))
    ctx.csv("excess.csv", ["t", "interaction_excess", "volume_excess"],
            list(zip(res.ts, res.excess, res.volume_excess)))
    ctx.json("excess.json", res.to_dict())
    band = c.get_float("diagnostics", "slope_band")
    ctx.check("excess_slope_t^2", abs(res.slope - 2.0) <= band, res.slope, [2 - band, 2 + band],
              "log-log slope in t at fixed R")
    vmax = float(np.max(np.abs(res.volume_excess)))
    ctx.check("volume_excess_zero", vmax <= 1e-12, vmax, 1e-12, "Jacobians of the +t and -t maps average to 1")
    icept = float(np.mean(np.log(res.excess) - res.slope * np.log(res.ts)))
    plots.loglog(ctx.path("excess.svg"), {"excess": (res.ts, res.excess)}, {"excess": (res.slope, icept)},
                 xlabel="t", ylabel="I(u_t) + I(u_-t) - 2 I(u)")


_2D = {"kernel": _KERNEL_2D, "domain": _DOMAIN_2D, "exterior": _EXTERIOR_2D, "seed": _SEED_2D,
       "solve": _SOLVE_DEFAULTS}

SCENARIOS: dict[str, Scenario] = {}


def _register(name, run, defaults, summary):
    SCENARIOS[name] = Scenario(name, run, defaults, summary)


_register("kernel-constants", _kernel_constants, {
    "kernel": {"dim": "2", "s_values": "0.25, 0.5, 0.75", "density": "frac_laplacian"},
    "diagnostics": {"directions": "64", "tolerance": "1e-4", "oracle": "true", "oracle_s_values": "0.5",
                    "oracle_order": "12", "oracle_tolerance": "1e-3"},
}, "A(nu), B(nu) tables and the 1D normalization oracle (u/d^s = 1/Gamma(1+s))")
_register("aniso-sweep", _aniso_sweep, {
    "kernel": {"dim": "2", "s": "0.5", "densities": "isotropic, frac_laplacian, cos2:0.5"},
    "diagnostics": {"directions": "64"},
}, "A(nu) over sampled directions for several kernels, polar plot")
_register("operator-identity", _operator_identity, {
    "kernel": {"dim": "2", "s_values": "0.25, 0.5, 0.75", "density": "cos2:0.5"},
    "diagnostics": {"directions": "0, 30", "points": "20", "t_min": "0.05", "t_max": "2.0",
                    "positive_tolerance": "1e-5", "negative_tolerance": "1e-3"},
}, "L of the half-space profile: zero on the positive side, c(s) B(nu) |t|^-s on the zero side")
_register("energy-identities", _energy_identities, {
    "kernel": {"dim": "2", "s": "0.5", "density": "cos2:0.5"},
    "diagnostics": {"pairs": "100", "nodes": "8", "omega": "0.6", "tolerance": "1e-10",
                    "scaling_radii": "0.25, 0.5, 1.0", "scaling_half_width": "1.5", "scaling_nodes": "97",
                    "scaling_band": "0.1"},
}, "min/max algebraic identity fuzzing and the energy growth of the profile in balls")
_register("halfspace-1d", _halfspace_1d, {
    "kernel": {"dim": "1", "s": "0.5", "density": "frac_laplacian"},
    "domain": {"half_width": "2.0", "nodes": "2048", "omega": "1.0"},
    "seed": {"shift": "0.1", "amplitude": "0.8", "noise": "0.05"},
    "solve": dict(_SOLVE_DEFAULTS, restarts="1"),
    "diagnostics": {"sup_factor": "3.0", "trace_tolerance": "0.05", "certification": "1e-3"},
}, "1D recovery of the half-line profile from a perturbed seed, trace and certification")
_register("halfspace-2d", _halfspace_2d, dict(_2D, diagnostics={
    "density_radii": "0.1, 0.2, 0.4", "density_band": "0.1, 0.9", "growth_radii": "0.05, 0.1, 0.2, 0.4",
    "growth_band": "0.1", "tail_radii": "0.125, 0.25, 0.5, 1.0", "tail_band": "0.15", "trace_tolerance": "0.05"}),
    "2D minimizer from a flat seed: density, growth, tail scaling, trace")
_register("flatness-decay", _flatness_decay, dict(_2D, diagnostics={
    "scales": "0.4, 0.2, 0.1, 0.05", "blowup_nodes": "129", "decay_factor": "0.5"}),
    "dyadic blow-ups: flatness eps and tail T_eps per scale")
_register("classify-2d", _classify_2d, dict(_2D, diagnostics={
    "scales": "0.4, 0.2, 0.1", "blowup_nodes": "129", "translation_cells": "4", "ball_radius": "0.4",
    "directions": "8", "product_tolerance": "1e-3"}),
    "blow-up distance to the best half-plane profile and translation monotonicity products")
_register("monotonicity-scaling", _monotonicity_scaling, {
    "kernel": {"dim": "2", "s": "0.5", "density": "frac_laplacian"},
    "diagnostics": {"radius": "4.0", "direction_deg": "17", "ts": "0.05, 0.1, 0.2, 0.4", "nodes": "81",
                    "slope_band": "0.2"},
}, "t^2 scaling of the energy excess of the logarithmic inner variation at fixed R")


def scenario_names() -> list[str]:
    return list(SCENARIOS)


def run_scenario(name: str, config: Config | None = None, out_root=None, seed: int = 0,
                 strict_keys: bool = True) -> tuple[int, Path]:
    """Run one scenario; returns (exit status, artifact directory).  Status 1 iff a contract failed."""
    if name not in SCENARIOS:
        raise KeyError(name)
    sc = SCENARIOS[name]
    config = config if config is not None else parse_config("")
    if strict_keys:
        config.check_known(sc.schema())
    else:
        known = sc.schema()
        config = Config({sec: {k: v for k, v in keys.items() if k in known.get(sec, ())}
                         for sec, keys in config.sections.items()}, config.lines, config.source)
    root = Path(out_root) if out_root is not None else default_out_root()
    out = root / name
    out.mkdir(parents=True, exist_ok=True)
    cache = root / ".cache"
    cache.mkdir(parents=True, exist_ok=True)
    ctx = Context(sc, config, out, seed, cache)
    t0 = time.perf_counter()
    sc.run(ctx)
    elapsed = time.perf_counter() - t0
    passed = all(ct.passed for ct in ctx.contracts)
    summary = {
        "scenario": name,
        "seed": ctx.seed,
        "config": ctx.cfg.to_dict(),
        "contracts": [asdict(ct) for ct in ctx.contracts],
        "passed": passed,
        "artifacts": sorted(set(ctx.artifacts)),
        "info": ctx.info,
        "elapsed_seconds": elapsed,
    }
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return (0 if passed else 1), out
