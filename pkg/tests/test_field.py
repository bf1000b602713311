import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lvcert.errors import BoundOverflow
from lvcert.field import (
    CutoffProfile,
    FourierLoop,
    act,
    apriori_bounds,
    beta,
    c_constants,
    eval_F,
    eval_G,
    eval_N,
    fixed_point_residual,
    in_theta0,
    theta_margins,
)
from lvcert.model import LVSystem

coefficients = arrays(np.float64, (2, 6), elements=st.floats(min_value=-1.0, max_value=1.0))


def test_loop_grid_matches_pointwise_evaluation(make_loop):
    x = make_loop(1, K=8)
    M = 33
    t = 2.0 * math.pi * np.arange(M) / M
    np.testing.assert_allclose(x.to_grid(M), x.value_at(t), atol=1e-14)


def test_mode_constructor():
    x = FourierLoop.mode(4, 2, component=1, cos=0.5, sin=-0.25)
    t = np.linspace(0.0, 2.0 * math.pi, 7)
    np.testing.assert_allclose(x.value_at(t)[1], 0.5 * np.cos(2 * t) - 0.25 * np.sin(2 * t), atol=1e-15)
    np.testing.assert_allclose(x.value_at(t)[0], 0.0)


def test_loops_have_zero_mean(make_loop):
    x = make_loop(2, K=8, scale=1.0)
    assert np.max(np.abs(x.to_grid().mean(axis=1))) < 1e-15


def test_action_by_pi_flips_odd_modes():
    x = FourierLoop.mode(3, 1)
    y = act(x, math.pi)
    t = np.linspace(0.0, 2.0 * math.pi, 11)
    np.testing.assert_allclose(y.value_at(t)[0], -np.cos(t), atol=1e-15)
    assert act(x, 0.0).z.tolist() == x.z.tolist()


@settings(max_examples=100, deadline=None)
@given(coefficients, coefficients, st.floats(min_value=-10.0, max_value=10.0))
def test_action_is_an_isometry(cos, sin, phi):
    x = FourierLoop.from_coefficients(cos, sin)
    assert act(x, phi).norm() == pytest.approx(x.norm(), rel=1e-12, abs=1e-14)


def test_derivative_and_antiderivative_are_inverse(make_loop):
    x = make_loop(3)
    np.testing.assert_allclose(x.derivative().antiderivative().z, x.z, atol=1e-15)


def test_sobolev_norm_of_a_single_mode():
    x = FourierLoop.mode(4, 3, cos=2.0)
    # int (4 cos^2 3t + 36 sin^2 3t) dt over one period
    assert x.norm2() == pytest.approx(40.0 * math.pi, rel=1e-14)
    assert x.inner(x) == pytest.approx(x.norm2(), rel=1e-14)


def test_isotropy_detects_the_smallest_mode_gcd():
    x = FourierLoop.mode(8, 2) + FourierLoop.mode(8, 6, component=1, sin=0.3)
    assert x.isotropy() == 2
    assert (x + FourierLoop.mode(8, 3)).isotropy() == 1
    assert FourierLoop.zeros(8).isotropy() == 0


def test_apriori_bounds_running_example(running_system, running_window):
    d1, d2, d3, d4, m0 = apriori_bounds(running_system, running_window.lambda_hi)
    assert d3 == pytest.approx(math.exp(9.0) - 1.0, rel=1e-12)
    assert d4 == pytest.approx(math.exp(9.0) - 1.0, rel=1e-12)
    assert 0.0 < d1 <= 1.0 and 0.0 < d2 <= 1.0
    assert m0 > 0.0


def test_apriori_bounds_without_cross_interaction():
    system = LVSystem.build([[1.0, 0.0], [0.0, 2.0]], [1.0, 2.0], 1.0)
    d1, _, d3, d4, _ = apriori_bounds(system, 1.0 / (2.0 * math.pi))
    assert d3 == pytest.approx(math.e - 1.0, rel=1e-14)
    assert d4 == pytest.approx(math.exp(2.0) - 1.0, rel=1e-14)
    assert d1 == pytest.approx(1.0 - math.exp(-(math.e - 1.0)), rel=1e-14)


def test_apriori_bounds_guard_overflow(running_system):
    with pytest.raises(BoundOverflow):
        apriori_bounds(running_system, 100.0)


def test_geometry_standing_assumptions(running_geometry, running_catalog):
    g = running_geometry
    assert g.d3 > 0.5 * (g.b[0] + g.d1)
    assert g.d4 > 0.5 * (g.b[1] + g.d2)
    assert g.delta0 > 0.0
    cand = running_catalog[0]
    norm = cand.amplitude * math.sqrt(math.pi * (1 + cand.k**2))
    assert g.m1 == pytest.approx(0.5 * norm)


def test_cutoff_profile_shape():
    p = CutoffProfile(0.1, 1.0, 0.05)
    assert p(0.0) == 1.0
    assert p(0.1) == 1.0
    assert p(1.0) == pytest.approx(0.05)
    assert p(5.0) == pytest.approx(0.05)
    s = np.linspace(0.0, 2.0, 401)
    assert np.all(np.diff(p(s)) <= 0.0)
    assert np.all(p.derivative(s) <= 0.0)
    assert p.inverse(0.525) == pytest.approx(0.55, rel=1e-12)
    assert p(p.inverse(0.3)) == pytest.approx(0.3, abs=1e-12)


def test_increasing_profile():
    p = CutoffProfile(0.0, 2.0, 0.1, increasing=True)
    assert p(0.0) == pytest.approx(0.1)
    assert p(2.0) == pytest.approx(1.0)
    assert p.derivative(1.0) > 0.0


def test_profile_validates_floor_and_band():
    with pytest.raises(ValueError):
        CutoffProfile(0.1, 1.0, 1.5)
    with pytest.raises(ValueError):
        CutoffProfile(1.0, 0.1, 0.5)
    with pytest.raises(ValueError):
        CutoffProfile(0.1, 1.0, 0.5).inverse(0.2)


def test_radial_beta_values(running_geometry):
    small = FourierLoop.mode(4, 1, cos=0.01)
    large = FourierLoop.mode(4, 1, cos=1.0)
    assert beta(FourierLoop.zeros(4), running_geometry) == 1.0
    assert beta(small, running_geometry) == 1.0
    assert beta(large, running_geometry) == pytest.approx(running_geometry.alpha0)
    assert beta(large, None, "one") == 1.0
    assert beta(large, running_geometry, "floor") == running_geometry.alpha0
    with pytest.raises(ValueError):
        beta(large, running_geometry, "bogus")


def test_radial_beta_is_nonincreasing_along_rays(running_geometry, make_loop):
    x = make_loop(4, scale=1.0)
    values = [beta(x * s, running_geometry) for s in np.linspace(0.0, 2.0, 81)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert all(running_geometry.alpha0 - 1e-15 <= v <= 1.0 for v in values)


def test_distance_beta_stays_in_range(running_geometry, make_loop):
    for seed in range(5):
        value = beta(make_loop(seed), running_geometry, "distance")
        assert running_geometry.alpha0 <= value <= 1.0 + 1e-15


def test_theta_membership(running_system, running_geometry):
    inside = FourierLoop.mode(4, 1, cos=0.5)
    outside = FourierLoop.mode(4, 1, cos=1.5)
    assert in_theta0(inside, running_system.b)
    assert not in_theta0(outside, running_system.b)
    margins = theta_margins(inside, running_geometry)
    assert set(margins) == {"box_lower", "box_upper", "energy", "ball"}
    assert margins["box_upper"] > 0.0


def test_N_vanishes_at_the_origin(running_system):
    assert np.all(eval_N(FourierLoop.zeros(8), 0.4, 1.0, running_system) == 0.0)


def test_N_with_identity_interaction():
    system = LVSystem.build([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0], 0.5 * math.pi)
    x = FourierLoop.mode(4, 1)
    M = 17
    t = 2.0 * math.pi * np.arange(M) / M
    N0 = eval_N(x, 1.0, 0.0, system, M)
    np.testing.assert_allclose(N0[0], -np.sin(t), atol=1e-14)
    np.testing.assert_allclose(N0[1], 0.0, atol=1e-15)
    N1 = eval_N(x, 1.0, 1.0, system, M)
    np.testing.assert_allclose(N1[0], -np.sin(t) * (1.0 + np.cos(t)), atol=1e-14)


def test_N_rejects_nonpositive_lambda(running_system):
    with pytest.raises(ValueError):
        eval_N(FourierLoop.zeros(4), 0.0, 1.0, running_system)


def test_c_constants(running_system):
    zero = FourierLoop.zeros(8)
    c1, c2 = c_constants(zero, 1.0, 1.0, running_system)
    assert np.all(c1 == 0.0) and np.all(c2 == 0.0)
    x = FourierLoop.mode(8, 1)
    c1, _ = c_constants(x, 1.0, 1.0, running_system)
    # mean of -2 cos(t - 3) (1 + cos t) is -cos 3
    assert c1[0] == pytest.approx(-math.cos(3.0), abs=1e-12)
    assert c1[1] == pytest.approx(0.0, abs=1e-12)


def test_F_at_the_origin(running_system):
    assert np.all(eval_F(FourierLoop.zeros(8), 0.4, 1.0, running_system).z == 0.0)


def test_F_is_the_antiderivative_of_the_drift(running_system, make_loop):
    x = make_loop(5)
    lam = 0.4
    Fx = eval_F(x, lam, 1.0, running_system)
    M = 4 * x.K + 1
    drift = FourierLoop.from_grid(lam * eval_N(x, lam, 1.0, running_system, M), x.K)
    np.testing.assert_allclose(Fx.derivative().z, drift.z, atol=1e-14)


def test_G_agrees_with_F_at_theta_zero(running_system, running_geometry, make_loop):
    for seed in range(20):
        x = make_loop(seed)
        lam = 0.25 + 0.01 * seed
        for variant in ("one", "radial"):
            F0 = eval_F(x, lam, 0.0, running_system, running_geometry, variant)
            G0 = eval_G(x, lam, 0.0, running_system, running_geometry, variant=variant)
            np.testing.assert_array_equal(F0.z, G0.z)


def test_G_uses_sigma_at_theta_one(running_system, make_loop):
    x = make_loop(6)
    G1 = eval_G(x, 0.4, 1.0, running_system, sigma=lambda lam: 2.0 * lam)
    G_half = eval_G(x, 0.4, 0.0, running_system)
    np.testing.assert_allclose(G1.z, 2.0 * G_half.z, rtol=1e-13, atol=1e-16)


@pytest.mark.parametrize("variant", ["one", "radial", "distance"])
def test_F_commutes_with_the_circle_action(running_system, running_geometry, make_loop, variant):
    x = make_loop(7, scale=0.2)
    lam = 0.35
    for phi in (0.3, 1.0, 2.5):
        lhs = eval_F(act(x, phi), lam, 1.0, running_system, running_geometry, variant)
        rhs = act(eval_F(x, lam, 1.0, running_system, running_geometry, variant), phi)
        assert (lhs - rhs).norm() <= 1e-12 * max(1.0, rhs.norm())


def test_fixed_point_residual_at_the_origin(running_system):
    assert fixed_point_residual(FourierLoop.zeros(8), 0.3, 1.0, running_system) == 0.0
