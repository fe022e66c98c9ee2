import numpy as np
import pytest

from nlop import energy as E
from nlop import kernel as K
from nlop import minimize as M
from nlop.halfspace import HalfSpaceProfile, ZeroExterior

S = 0.5


@pytest.fixture(scope="module")
def profile_1d():
    spec = K.frac_laplacian(1, S)
    A = K.free_boundary_constant_A(spec, [1.0])
    p = HalfSpaceProfile((1.0,), 0.0, A, S)
    grid = E.Grid((-2.0,), (2.0,), (257,))
    f = E.Field.from_exterior(grid, ((-1.0,), (1.0,)), p, S)
    return spec, p, f


def test_solve_config_validation():
    with pytest.raises(ValueError):
        M.SolveConfig(shrink=1.5)
    with pytest.raises(ValueError):
        M.SolveConfig(tol_grad=0.0)
    with pytest.raises(ValueError):
        M.SolveConfig(delta0=-1.0)
    with pytest.raises(ValueError):
        M.SolveConfig(restarts=-1)


def test_project_clamps_and_restores_frame():
    mask = np.array([False, True, True, False])
    g = np.array([1.0, 0.0, 0.0, 2.0])
    np.testing.assert_array_equal(M.project(np.array([5.0, -1.0, 0.5, 7.0]), mask, g), [1.0, 0.0, 0.5, 2.0])


def test_gradient_matches_finite_differences():
    spec = K.cos2(2, S, 0.5)
    ext = HalfSpaceProfile((0.6, 0.8), 0.0, 1.0, S)
    grid = E.Grid.cube(1.0, 9, 2)
    f = E.Field.from_exterior(grid, ((-0.5, -0.5), (0.5, 0.5)), ext, S)
    model = E.energy_model(spec, grid, f.omega, ext)
    rng = np.random.default_rng(0)
    u = f.values + np.where(f.mask, rng.uniform(0, 0.5, grid.shape), 0.0)
    g = model.gradient(u)
    I = lambda v: sum(model.interaction(v))
    for idx in np.argwhere(f.mask)[:5]:
        e = np.zeros(grid.shape)
        e[tuple(idx)] = 1e-5
        fd = (I(u + e) - I(u - e)) / 2e-5
        assert g[tuple(idx)] == pytest.approx(fd, rel=1e-6)
    assert np.all(g[~f.mask] == 0)


def test_zero_data_gives_zero():
    spec = K.frac_laplacian(2, S)
    grid = E.Grid.cube(1.0, 17, 2)
    z = E.Field.from_exterior(grid, ((-0.5, -0.5), (0.5, 0.5)), ZeroExterior(2), S)
    bump = np.where(z.mask, 0.3 * np.exp(-10 * (grid.points() ** 2).sum(-1)), 0.0)
    rep = M.minimize(spec, z.with_values(bump), M.SolveConfig(restarts=0), certify=False)
    assert np.all(rep.field.values == 0.0)
    assert rep.energy == 0.0


def test_profile_is_a_fixed_point_in_one_dimension(profile_1d):
    spec, p, f = profile_1d
    rep = M.minimize(spec, f, M.SolveConfig(restarts=0))
    h = f.grid.h
    assert np.abs(rep.field.values - f.values).max() <= 3 * h**S
    gaps = dict(rep.certification)
    assert gaps["identity"] == 0.0
    assert gaps["amplitude_1.5"] > 0
    assert min(gaps.values()) >= -M.certification_tolerance(rep.energy)


def test_perturbed_start_returns_to_profile(profile_1d):
    spec, p, f = profile_1d
    seed = HalfSpaceProfile((1.0,), 0.2, 0.7 * p.amplitude, S)
    f2 = E.Field.from_exterior(f.grid, f.omega, p, S, inside=seed)
    rep0 = M.minimize(spec, f, M.SolveConfig(restarts=0), certify=False)
    rep = M.minimize(spec, f2, M.SolveConfig(restarts=1, seed=3), certify=False)
    assert rep.energy <= E.total_energy(spec, f2).total
    assert rep.energy == pytest.approx(rep0.energy, rel=1e-6)
    assert np.abs(rep.field.values - f.values).max() <= 3 * f.grid.h**S
    assert len(rep.attempts) == 2


def test_minimize_never_touches_frame(profile_1d):
    spec, p, f = profile_1d
    rep = M.minimize(spec, f, M.SolveConfig(restarts=0), certify=False)
    np.testing.assert_array_equal(rep.field.values[~f.mask], f.values[~f.mask])


def test_minimize_rejects_bad_starts(profile_1d):
    spec, p, f = profile_1d
    bad = f.values.copy()
    bad[0] += 1.0
    with pytest.raises(ValueError):
        M.minimize(spec, f.with_values(bad))
    neg = f.values.copy()
    neg[f.mask] = -0.1
    with pytest.raises(ValueError):
        M.minimize(spec, f.with_values(neg))


def test_certification_detects_exterior_change(profile_1d):
    spec, p, f = profile_1d
    bad = f.values.copy()
    bad[-1] += 1.0
    with pytest.raises(ValueError):
        M.certify_minimality(spec, f, {"bad": f.with_values(bad)})


def test_certification_gap_of_min_and_max_pair(profile_1d):
    # I(u^v) - I(u) + I(uvv) - I(u) = I(v) - I(u) - 4X
    spec, p, f = profile_1d
    shifted = HalfSpaceProfile((1.0,), 0.1, p.amplitude, S)
    v = E.Field.from_exterior(f.grid, f.omega, p, S, inside=shifted)
    lo = f.with_values(np.minimum(f.values, v.values))
    hi = f.with_values(np.maximum(f.values, v.values))
    gaps = dict(M.certify_minimality(spec, f, {"lo": lo, "hi": hi, "v": v}))
    X = E.cross_term(spec, f, v)
    assert gaps["lo"] + gaps["hi"] == pytest.approx(gaps["v"] - 4 * X, rel=1e-9, abs=1e-12)


def test_interior_bump_on_profile_is_removed(profile_1d):
    spec, p, f = profile_1d
    x = f.grid.points()[..., 0]
    bump = np.where(f.mask, 0.3 * np.exp(-200 * (x + 0.5) ** 2), 0.0)
    start = f.with_values(f.values + bump)
    e_start = E.total_energy(spec, start).total
    assert e_start > E.total_energy(spec, f).total
    rep = M.minimize(spec, start, M.SolveConfig(restarts=0), certify=False)
    assert rep.energy < e_start
    assert rep.field.values[x < -0.1].max() == 0.0
