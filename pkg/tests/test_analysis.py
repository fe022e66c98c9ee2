import math

import numpy as np
import pytest

from nlop import analysis as An
from nlop import energy as E
from nlop import kernel as K
from nlop.halfspace import HalfSpaceProfile, ZeroExterior

S = 0.5
A0 = 2 / math.sqrt(math.pi)  # free boundary constant of the fractional Laplacian at s = 1/2


def _unit(phi):
    return (math.cos(phi), math.sin(phi))


def _profile_field(nu=(1.0, 0.0), c=0.0, A=A0, nodes=65, hw=1.0):
    p = HalfSpaceProfile(nu, c, A, S)
    grid = E.Grid.cube(hw, nodes, 2)
    return E.Field.from_exterior(grid, ((-hw / 2,) * 2, (hw / 2,) * 2), p, S), p


def test_extract_boundary_planar():
    nu = _unit(0.3)
    f, p = _profile_field(nu, 0.05)
    geo = An.extract_boundary(f)
    assert not geo.empty
    np.testing.assert_allclose(geo.points @ np.asarray(nu) + 0.05, 0.0, atol=1e-12)
    np.testing.assert_allclose(geo.normals, np.tile(nu, (len(geo.normals), 1)), atol=1e-8)
    assert geo.graph_fit["residual"] < 1e-10
    d = geo.distance_field
    pos = f.values > 0
    assert np.all(np.isnan(d[~pos])) and np.all(d[pos] >= 0)


def test_extract_boundary_circle_normals_point_into_support():
    grid = E.Grid.cube(1.0, 129, 2)
    x = grid.points()
    r = np.linalg.norm(x, axis=-1)
    f = E.Field(grid, np.maximum(r - 0.5, 0.0) ** S, ((-0.5, -0.5), (0.5, 0.5)), ZeroExterior(2), S)
    geo = An.extract_boundary(f)
    radial = geo.points / np.linalg.norm(geo.points, axis=1)[:, None]
    assert np.abs(np.linalg.norm(geo.points, axis=1) - 0.5).max() < 0.2 * grid.h
    assert np.min(np.sum(geo.normals * radial, axis=1)) > 0.99


def test_extract_boundary_empty():
    f, _ = _profile_field()
    for vals in (np.zeros(f.grid.shape), np.ones(f.grid.shape)):
        geo = An.extract_boundary(f.with_values(vals))
        assert geo.empty and len(geo.points) == 0
        with pytest.raises(ValueError):
            An.nearest_boundary_point(geo, [0.0, 0.0])


@pytest.mark.parametrize("amp", [A0, 2 * A0])
def test_trace_recovers_amplitude(amp):
    f, _ = _profile_field(_unit(0.2), 0.0, amp, nodes=129)
    geo = An.extract_boundary(f)
    assert An.trace_u_over_ds(f, geo, [0.0, 0.0]) == pytest.approx(amp, rel=2e-2)


def test_trace_needs_inward_samples():
    f, _ = _profile_field((1.0, 0.0), -0.97)
    geo = An.extract_boundary(f)
    with pytest.raises(An.InsufficientResolution):
        An.trace_u_over_ds(f, geo, [0.97, 0.0])


def test_blowup_of_profile_is_the_profile():
    nu = _unit(0.4)
    f, p = _profile_field(nu, 0.0)
    x0 = 0.1 * np.array([-nu[1], nu[0]])  # on the free line
    for r in (0.25, 0.5):
        b = An.blowup(f, x0, r, nodes=33)
        np.testing.assert_allclose(b.values, p(b.grid.points().reshape(-1, 2)).reshape(b.grid.shape), atol=1e-12)
    with pytest.raises(ValueError):
        An.blowup(f, x0, 0.0)
    with pytest.raises(ValueError):
        An.blowup(f, [0.9, 0.0], 0.5)


def test_blowup_semigroup():
    grid = E.Grid.cube(1.0, 129, 2)
    x = grid.points()
    vals = np.maximum(x[..., 0] + 0.3 * x[..., 1] ** 2, 0.0) ** S
    f = E.Field(grid, vals, ((-0.5, -0.5), (0.5, 0.5)), ZeroExterior(2), S)
    x0 = np.array([0.0, 0.0])
    direct = An.blowup(f, x0, 0.2, nodes=17)
    twice = An.blowup(An.blowup(f, x0, 0.5, nodes=65), x0, 0.4, nodes=17)
    assert np.abs(direct.values - twice.values).max() < 0.05
    # blow-up exteriors evaluate the base field beyond the unit box
    y = np.array([[3.0, 0.0]])
    ref = An.BoundarySampler(f)(x0 + 0.2 * y)[0] / 0.2**S
    assert direct.exterior(y)[0] == pytest.approx(ref, rel=1e-12)


def test_measure_flatness_examples():
    nu = _unit(0.25)
    f, _ = _profile_field(nu, 0.0)
    eps, T0 = An.measure_flatness(f, nu, A0)
    # T0 is the multilinear interpolation error of u^s near the free line
    assert eps < 1e-12 and T0 < 1e-3
    g, _ = _profile_field(nu, 0.1)
    eps, T = An.measure_flatness(g, nu, A0)
    assert eps == pytest.approx(0.1, rel=1e-9)
    assert T < 1e-3  # the shifted profile sits inside the sandwich everywhere
    # a tilted reference direction is violated at infinity
    eps, T = An.measure_flatness(f, _unit(0.45), A0)
    assert T > 100 * T0


def test_measure_flatness_linear_in_small_rotation():
    f, _ = _profile_field((1.0, 0.0), 0.0, nodes=129)
    e1 = An.measure_flatness(f, _unit(0.02), A0, with_tail=False)[0]
    e2 = An.measure_flatness(f, _unit(0.04), A0, with_tail=False)[0]
    assert e2 / e1 == pytest.approx(2.0, rel=0.05)


def test_measure_flatness_accepts_kernel():
    f, _ = _profile_field((1.0, 0.0), 0.0)
    spec = K.frac_laplacian(2, S)
    assert An.measure_flatness(f, (1.0, 0.0), spec, with_tail=False)[0] < 1e-9


def test_best_direction_recovers_rotation():
    nu = _unit(0.3)
    f, _ = _profile_field(nu, 0.0, nodes=129)
    got = An.best_direction(f, (1.0, 0.0), A0, width=0.5)
    assert np.linalg.norm(got - np.asarray(nu)) < 1e-3
    rng = np.random.default_rng(0)
    noisy = f.with_values(np.maximum(f.values * (1 + 0.01 * rng.uniform(-1, 1, f.grid.shape)), 0))
    got = An.best_direction(noisy, (1.0, 0.0), A0, width=0.5)
    assert np.linalg.norm(got - np.asarray(nu)) < 1e-2


def test_best_profile_fit_recovers_profile():
    nu = _unit(0.35)
    f, _ = _profile_field(nu, 0.07, nodes=129)
    got_nu, c, d = An.best_profile_fit(f, (1.0, 0.0), A0)
    assert np.linalg.norm(got_nu - np.asarray(nu)) < 1e-4
    assert c == pytest.approx(0.07, abs=1e-4)
    assert d < 1e-3


def test_domain_variation_examples():
    nu = np.array(_unit(0.2))
    x = 0.3 * nu + 0.1 * np.array([-nu[1], nu[0]])
    f, _ = _profile_field(tuple(nu), 0.0)
    # roots carry the interpolation error of u, about 1e-4 in space here
    np.testing.assert_allclose(An.domain_variation(f, nu, 0.1, x, A0), [0.0], atol=5e-3)
    g, _ = _profile_field(tuple(nu), 0.05)
    np.testing.assert_allclose(An.domain_variation(g, nu, 0.1, x, A0), [0.5], atol=5e-3)
    far, _ = _profile_field(tuple(nu), 0.2)
    assert An.domain_variation(far, nu, 0.1, x, A0).size == 0
    with pytest.raises(ValueError):
        An.domain_variation(f, nu, 0.1, -x, A0)


def test_density_ratio_half_plane():
    f, _ = _profile_field((1.0, 0.0), 0.0, nodes=129)
    assert An.density_ratio(f, [0.0, 0.0], 0.5) == pytest.approx(0.5, abs=0.02)
    assert An.density_ratio(f, [0.6, 0.0], 0.3) == 1.0
    assert An.density_ratio(f.with_values(np.ones(f.grid.shape)), [0.0, 0.0], 0.5) == 1.0
    with pytest.raises(ValueError):
        An.density_ratio(f, [0.0, 0.0], 2.0)


def test_growth_exponents_profile():
    f, _ = _profile_field((1.0, 0.0), 0.0)
    radii = [0.125, 0.25, 0.5, 0.75]  # grid nodes on the normal line
    fit = An.growth_exponents(f, [0.0, 0.0], radii)
    assert fit.slope == pytest.approx(S, abs=1e-12) and fit.residual < 1e-12
    fit7 = An.growth_exponents(f.with_values(7 * f.values), [0.0, 0.0], radii)
    assert fit7.slope == pytest.approx(S, abs=1e-12)
    assert An.growth_exponents(f.with_values(0 * f.values), [0.0, 0.0], radii).degenerate
    with pytest.raises(ValueError):
        An.growth_exponents(f, [0.0, 0.0], radii[:3])


def test_translation_product_examples():
    nu = (1.0, 0.0)
    f, _ = _profile_field(nu, 0.0)
    h = f.grid.h
    plus, minus = An.translation_monotonicity_product(f, nu, 4 * h, ((0.0, 0.0), 0.4))
    assert plus == 0.0 and minus > 0
    # a bump is increasing on one side and decreasing on the other
    x = f.grid.points()
    bump = f.with_values(np.exp(-8 * (x**2).sum(-1)))
    plus, minus = An.translation_monotonicity_product(bump, nu, 4 * h, ((0.0, 0.0), 0.4))
    assert plus * minus / (plus + minus) ** 2 > 0.2
    with pytest.raises(ValueError):
        An.translation_monotonicity_product(f, nu, 0.0, ((0.0, 0.0), 0.4))


def test_flatness_report_requires_decreasing_scales():
    with pytest.raises(ValueError):
        An.FlatnessReport([0.1, 0.2], [0.0, 0.0], [0.0, 0.0], [(1, 0), (1, 0)])


def test_log_cutoff_values():
    R = 16.0
    x = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 8.0], [16.0, 0.0], [30.0, 1.0]])
    np.testing.assert_allclose(An.log_cutoff(x, R), [1.0, 1.0, 2 * (1 - math.log(8) / math.log(16)), 0.0, 0.0])
    # continuity at both ends of the annulus
    assert An.log_cutoff([[4.0 + 1e-9, 0.0]], R)[0] == pytest.approx(1.0, abs=1e-9)


def test_inverse_deformation_inverts():
    rng = np.random.default_rng(3)
    y = rng.uniform(-5, 5, (50, 2))
    nu = np.array(_unit(0.3))
    R, t = 4.0, 0.3
    x = y + t * An.log_cutoff(y, R)[:, None] * nu
    np.testing.assert_allclose(An.inverse_deformation(x, R, nu, t), y, atol=1e-12)


def _brute_excess(spec, u, R, nu, t, hw, nodes):
    grid = E.Grid.cube(hw, nodes, 2)
    X = grid.points().reshape(-1, 2)
    v = u(X)
    phi = An.log_cutoff(X, R)
    dphi = An._log_cutoff_grad(X, R) @ nu
    hn = grid.h**2
    total = []
    for i in range(len(X)):
        for j in range(len(X)):
            if i == j:
                continue
            e = -2 * K.eval_kernel(spec, X[i] - X[j])
            for sg in (1, -1):
                Yi, Yj = X[i] + sg * t * phi[i] * nu, X[j] + sg * t * phi[j] * nu
                e += K.eval_kernel(spec, Yi - Yj) * (1 + sg * t * dphi[i]) * (1 + sg * t * dphi[j])
            total.append((v[i] - v[j]) ** 2 * e)
    return hn * hn * math.fsum(total)


def test_monotonicity_excess_matches_brute_force():
    spec = K.cos2(2, S, 0.5)
    p = HalfSpaceProfile((1.0, 0.0), 0.0, A0, S)
    nu = np.array(_unit(0.3))
    R, hw, nodes, t = 2.0, 3.0, 13, 0.2
    got = An.monotonicity_excess(spec, p, R, nu, [t], half_width=hw, nodes=nodes, chunk=7)
    ref = _brute_excess(spec, p, R, nu, t, hw, nodes)
    assert got.excess[0] == pytest.approx(ref, rel=1e-10)
    assert got.volume_excess[0] == pytest.approx(0.0, abs=1e-12)
    scaled = An.monotonicity_excess(spec, lambda x: 7 * p(x), R, nu, [t], half_width=hw, nodes=nodes)
    assert scaled.excess[0] == pytest.approx(49 * got.excess[0], rel=1e-10)


def test_monotonicity_excess_quadratic_in_t():
    spec = K.frac_laplacian(2, S)
    p = HalfSpaceProfile((1.0, 0.0), 0.0, A0, S)
    res = An.monotonicity_excess(spec, p, 4.0, _unit(0.3), [0.1, 0.2, 0.4], nodes=41)
    assert np.all(res.excess > 0)
    assert res.slope == pytest.approx(2.0, abs=0.2)
    assert np.abs(res.volume_excess).max() < 1e-12
