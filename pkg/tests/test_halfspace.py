import math

import numpy as np
import pytest

from nlop import halfspace as H
from nlop import kernel as K


def test_eval_profile_examples():
    p = H.HalfSpaceProfile((0.0, 1.0), 0.0, 1.0, 0.5)
    assert H.eval_profile(p, [3.0, 4.0]) == pytest.approx(2.0, rel=1e-15)
    rng = np.random.default_rng(0)
    x = rng.uniform(-3, 3, (200, 2))
    q = H.HalfSpaceProfile((0.6, 0.8), 0.3, 1.7, 0.4)
    v = H.eval_profile(q, x)
    assert np.all(v >= 0)
    assert np.all(v[x @ q.normal <= -0.3] == 0)


def test_profile_depends_on_normal_coordinate_only():
    p = H.HalfSpaceProfile((0.6, 0.8), 0.2, 1.3, 0.5)
    tau = np.array([-0.8, 0.6])
    x = np.array([[0.5, 0.7], [1.0, -0.3]])
    np.testing.assert_allclose(p(x), p(x + 2.5 * tau), rtol=1e-14)
    # homogeneity about a point of the free hyperplane
    z = -0.2 * p.normal
    for r in (0.5, 4.0):
        np.testing.assert_allclose(p(z + r * (x - z)), r**0.5 * p(x), rtol=1e-13)


def test_profile_normalizes_and_validates():
    p = H.HalfSpaceProfile((0.6, 0.8), 0.0, 1.0, 0.5)
    assert isinstance(p.nu, tuple) and p.nu == (0.6, 0.8)
    with pytest.raises(ValueError):
        H.HalfSpaceProfile((1.0, 1.0), 0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        H.HalfSpaceProfile((1.0, 0.0), 0.0, -1.0, 0.5)


def test_exterior_round_trip():
    for ext in (H.ZeroExterior(2), H.HalfSpaceProfile((0.6, 0.8), 0.1, 1.1, 0.5),
                H.WedgeProfile(((1.0, 0.0), (0.0, 1.0)), (0.0, -0.1), 1.2, 0.5)):
        assert H.exterior_from_dict(ext.to_dict()) == ext
    with pytest.raises(ValueError):
        H.exterior_from_dict({"type": "spline"})


def test_wedge_is_max_of_profiles():
    a, b = (1.0, 0.0), (0.6, 0.8)
    w = H.WedgeProfile((a, b), (0.0, 0.1), 1.3, 0.5)
    x = np.random.default_rng(2).uniform(-2, 2, (100, 2))
    ref = np.maximum(H.HalfSpaceProfile(a, 0.0, 1.3, 0.5)(x), H.HalfSpaceProfile(b, 0.1, 1.3, 0.5)(x))
    np.testing.assert_allclose(w(x), ref, rtol=1e-14)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_L_vanishes_on_positive_side(s):
    spec = K.frac_laplacian(2, s)
    p = H.HalfSpaceProfile((0.6, 0.8), 0.0, 1.0, s)
    x = 1.0 * p.normal
    assert abs(H.apply_L_to_profile(spec, p, x)) < 1e-6


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("density", ["frac_laplacian", "cos2:0.5"])
def test_L_on_zero_side_closed_form(s, density):
    spec = K.kernel_from_config({"s": s, "density": density})
    nu = (math.cos(0.4), math.sin(0.4))
    p = H.HalfSpaceProfile(nu, 0.0, 1.0, s)
    B = K.direction_constant_B(spec, nu)
    for t in (0.1, 0.7, 2.0):
        val = H.apply_L_to_profile(spec, p, -t * np.asarray(nu))
        assert val == pytest.approx(H.halfline_constant(s) * B * t ** (-s), rel=1e-4)


def test_L_scaling_on_zero_side():
    s = 0.3
    spec = K.cos2(2, s, 0.5)
    p = H.HalfSpaceProfile((1.0, 0.0), 0.2, 1.4, s)
    v1 = H.apply_L_to_profile(spec, p, [-0.2 - 0.5, 0.3])
    v2 = H.apply_L_to_profile(spec, p, [-0.2 - 1.0, -1.0])
    assert v2 == pytest.approx(2 ** (-s) * v1, rel=1e-8)


def test_L_one_dimensional_matches_two_dimensional_moment():
    s = 0.5
    p1 = H.HalfSpaceProfile((1.0,), 0.0, 1.0, s)
    v = H.apply_L_to_profile(K.frac_laplacian(1, s), p1, [-0.5])
    assert v == pytest.approx(H.halfline_constant(s) * 0.5 ** (-s), rel=1e-8)


def test_L_singular_on_hyperplane():
    spec = K.frac_laplacian(2, 0.5)
    p = H.HalfSpaceProfile((1.0, 0.0), 0.5, 1.0, 0.5)
    with pytest.raises(ValueError):
        H.apply_L_to_profile(spec, p, [-0.5, 3.0])


def test_tail_zero_and_constant():
    assert H.tail(lambda y: np.zeros(len(y)), 1.0, n=2, s=0.5) == 0.0
    for s in (0.25, 0.5, 0.75):
        for R in (0.5, 1.0, 4.0):
            val = H.tail(lambda y: np.ones(len(y)), R, np.array([0.3, -0.2]), s=s)
            assert val == pytest.approx(math.pi / s, rel=1e-6)


def test_tail_profile_homogeneous_growth():
    s = 0.5
    p = H.HalfSpaceProfile((0.0, 1.0), 0.0, 1.0, s)
    vals = [H.tail(p, R, np.zeros(2), s=s) for R in (0.5, 1.0, 2.0)]
    assert vals[1] / vals[0] == pytest.approx(2**s, rel=1e-6)
    assert vals[2] / vals[1] == pytest.approx(2**s, rel=1e-6)
    # one-dimensional reduction: C = int |theta_2|^s_+ dtheta * int_1^inf r^{-1-s} dr
    C = 0.5 * 2 * math.sqrt(math.pi) * math.gamma(s / 2 + 0.5) / math.gamma(s / 2 + 1) / s
    assert vals[1] == pytest.approx(C, rel=2e-3)


def test_tail_subadditive():
    s = 0.5
    f = lambda y: np.abs(np.sin(y[:, 0])) * np.linalg.norm(y, axis=1) ** 0.3
    g = H.HalfSpaceProfile((1.0, 0.0), 0.2, 0.8, s)
    R, x0 = 0.7, np.array([0.1, 0.2])
    lhs = H.tail(lambda y: f(y) + g(y), R, x0, s=s)
    assert lhs <= H.tail(f, R, x0, s=s) + H.tail(g, R, x0, s=s) + 1e-12


def test_tail_divergence():
    with pytest.raises(H.DivergenceError):
        H.tail(lambda y: np.linalg.norm(y, axis=1) ** 1.2, 1.0, n=2, s=0.5)
    with pytest.raises(H.DivergenceError):
        H.tail(lambda y: np.full(len(y), np.inf), 1.0, n=2, s=0.5)
    with pytest.raises(ValueError):
        H.tail(lambda y: np.ones(len(y)), 0.0, n=2, s=0.5)
