import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from heatbridge import kernels as K

coord = st.floats(-5, 5, allow_nan=False)


def vec(d):
    return st.lists(coord, min_size=d, max_size=d).map(np.array)


def e(i, d):
    v = np.zeros(d)
    v[i] = 1.0
    return v


# --------------------------------------------------------------------------
# Gauss-Weierstrass kernel


def test_gauss_kernel_at_coincident_points():
    assert K.gauss_kernel(1.0, np.zeros(3), np.zeros(3)).value == pytest.approx((4 * math.pi) ** -1.5, rel=1e-15)


@given(st.floats(1e-3, 1e3), vec(3), vec(3))
def test_gauss_kernel_symmetric(t, x, y):
    assert K.log_gauss_kernel(t, x, y) == K.log_gauss_kernel(t, y, x)


def test_gauss_kernel_log_space_survives_far_probes():
    kv = K.gauss_kernel(1e-6, np.zeros(3), 1e3 * e(0, 3))
    assert kv.value == 0.0 and math.isfinite(kv.log_value)


def test_gauss_semigroup_by_coordinate_quadrature():
    # the product kernel factorizes, so the 3-d z-integral is a product of 1-d integrals
    s, t = 0.3, 1.0
    x, y = np.zeros(3), e(0, 3)
    g1 = lambda tt, a, b: math.exp(-(b - a) ** 2 / (4 * tt)) / math.sqrt(4 * math.pi * tt)
    total = 1.0
    for i in range(3):
        val, _ = integrate.quad(lambda z: g1(s, x[i], z) * g1(t - s, z, y[i]), -30, 30, epsabs=0, epsrel=1e-12)
        total *= val
    assert total == pytest.approx(K.gauss_kernel(t, x, y).value, rel=1e-10)


def test_gauss_kernel_rejects_bad_input():
    with pytest.raises(ValueError):
        K.gauss_kernel(0.0, np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        K.gauss_kernel(1.0, np.zeros(3), np.zeros(2))
    with pytest.raises(ValueError):
        K.as_point(np.zeros(K.MAX_DIM + 1))


# --------------------------------------------------------------------------
# bridge density


def test_bridge_density_integrates_to_one():
    s, t, x, y = 0.5, 1.0, np.zeros(3), e(0, 3)
    mean, var = K.bridge_moments(s, t, x, y)
    # one coordinate times the two others (which integrate to 1 by the same formula)
    val, _ = integrate.quad(lambda z: math.exp(-(z - mean[0]) ** 2 / (2 * var)) / math.sqrt(2 * math.pi * var),
                            -20, 20, epsabs=0, epsrel=1e-12)
    assert val == pytest.approx(1.0, abs=1e-12)
    # and the full 3-d density against the same product
    z = np.array([0.3, -0.2, 0.1])
    prod = np.prod(np.exp(-(z - mean) ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var))
    assert K.bridge_density(s, t, x, y, z).value == pytest.approx(prod, rel=1e-13)


def test_bridge_moments_example():
    mean, var = K.bridge_moments(0.25, 1.0, np.zeros(3), 2 * e(0, 3))
    np.testing.assert_allclose(mean, [0.5, 0, 0])
    assert var == pytest.approx(0.375)


@settings(max_examples=60)
@given(st.floats(0.01, 0.99), st.floats(0.05, 20), vec(3), vec(3), vec(3))
def test_bridge_gaussian_form_matches_kernel_ratio(frac, t, x, y, z):
    s = frac * t
    a = K.bridge_density(s, t, x, y, z).log_value
    b = K.bridge_density_ratio(s, t, x, y, z).log_value
    assert a == pytest.approx(b, abs=1e-8 * max(1.0, abs(a)))


@settings(max_examples=60)
@given(st.floats(0.01, 0.99), st.floats(0.05, 20), vec(3), vec(3), vec(3))
def test_bridge_reversal_and_triangle_bound(frac, t, x, y, z):
    s = frac * t
    a = K.bridge_density(s, t, x, y, z).log_value
    assert a == pytest.approx(K.bridge_density(t - s, t, y, x, z).log_value, abs=1e-9 * max(1.0, abs(a)))
    cap = -1.5 * math.log(4 * math.pi) - 1.5 * math.log((t - s) * s / t)
    assert a <= cap + 1e-9


def test_bridge_rejects_s_outside():
    with pytest.raises(ValueError):
        K.bridge_density(1.0, 1.0, np.zeros(3), np.zeros(3), np.zeros(3))


# --------------------------------------------------------------------------
# Newtonian kernel and K


def test_newtonian_constants():
    assert K.newtonian_kernel(np.zeros(3), e(0, 3)).value == pytest.approx(1 / (4 * math.pi), rel=1e-15)
    assert K.newtonian_kernel(np.zeros(4), 2 * e(0, 4)).value == pytest.approx(1 / (16 * math.pi ** 2), rel=1e-15)
    with pytest.raises(ValueError):
        K.newtonian_kernel(np.zeros(2), e(0, 2))
    with pytest.raises(ValueError):
        K.newtonian_kernel(np.zeros(3), np.zeros(3))


def test_newtonian_kernel_is_time_integral_of_heat_kernel():
    x, z = np.zeros(4), e(0, 4)
    val, _ = integrate.quad(lambda s: K.gauss_kernel(s, x, z).value, 0, math.inf, epsabs=0, epsrel=1e-12)
    assert val == pytest.approx(K.newtonian_kernel(x, z).value, rel=1e-8)


@given(st.integers(3, 8), st.floats(0.05, 10))
def test_kernel_K_at_y_zero(d, r):
    x = r * e(0, d)
    assert K.kernel_K(x, np.zeros(d)).value == pytest.approx(r ** (2 - d), rel=1e-13)


@given(vec(3).filter(lambda v: np.linalg.norm(v) > 1e-3), vec(3))
def test_kernel_K_d3_form(x, y):
    rx = np.linalg.norm(x)
    expect = math.exp(-(rx * np.linalg.norm(y) - x @ y) / 2) / rx
    assert K.kernel_K(x, y).value == pytest.approx(expect, rel=1e-12, abs=1e-300)


def test_kernel_K_d4_example():
    # sqrt(2) e^{-1/2}, re-derived by hand from the displayed formula
    assert K.kernel_K(e(0, 4), e(1, 4)).value == pytest.approx(0.8577638849607068, rel=1e-14)


def test_kernel_K_singular_at_origin():
    with pytest.raises(ValueError):
        K.kernel_K(np.zeros(4), e(0, 4))


# --------------------------------------------------------------------------
# Bessel K


def test_bessel_half_integer_closed_forms():
    assert K.bessel_k(0.5, 1.0) == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-1), rel=1e-14)
    assert K.bessel_k(1.5, 1.0) == pytest.approx(2 * math.sqrt(math.pi / 2) * math.exp(-1), rel=1e-14)


def test_bessel_integer_order_value():
    # frozen from the integral representation (cosh form), independent of the series
    assert K.bessel_k(1.0, 1.0) == pytest.approx(0.6019072301972346, rel=1e-12)
    assert K.bessel_k_integral(1.0, 1.0) == pytest.approx(0.6019072301972346, rel=1e-12)


@pytest.mark.parametrize("nu", [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0])
def test_bessel_matches_scipy_across_regimes(nu):
    for z in (1e-4, 0.3, 1.9, 2.0, 2.1, 7.0, 50.0, 600.0):
        ref = special.kve(nu, z) * math.exp(-z)
        assert K.bessel_k(nu, z) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("nu", [1.0, 2.0, 3.0])
def test_bessel_series_crossover_agrees_with_integral(nu):
    for z in (1.5, 2.0, 2.5):
        assert K.bessel_k(nu, z) == pytest.approx(K.bessel_k_integral(nu, z), rel=1e-10)


def test_bessel_comparison_bracket():
    # empirical bracket of K_nu against z^-nu e^-z (1+z)^(nu-1/2) on [1e-4, 1e3]
    zs = np.geomspace(1e-4, 1e3, 200)
    for nu in (0.5, 1.0, 1.5, 2.0, 2.5):
        r = np.exp([K.log_bessel_k(nu, z) - K.log_bessel_k_comparison(nu, z) for z in zs])
        assert r.min() > 0.1 and r.max() < 10 * 2 ** nu * math.gamma(nu + 1)


def test_bessel_rejects_unsupported():
    with pytest.raises(ValueError):
        K.bessel_k(0.3, 1.0)
    with pytest.raises(ValueError):
        K.bessel_k(1.0, 0.0)


# --------------------------------------------------------------------------
# J


def test_J_d3_example():
    kv = K.kernel_J(e(1, 3), e(0, 3), 0.0)
    assert kv.value == pytest.approx(2 * math.sqrt(math.pi) * math.exp(-0.5), rel=1e-13)
    assert K.kernel_J_quadrature(e(1, 3), e(0, 3), 0.0).value == pytest.approx(kv.value, rel=1e-9)


@pytest.mark.parametrize("d", [3, 4, 5, 6])
def test_J_newtonian_limit(d):
    x = 0.7 * e(0, d)
    closed = math.gamma(d / 2 - 1) * (0.49 / 4) ** (1 - d / 2)
    assert K.kernel_J(x, np.zeros(d), 0.0).value == pytest.approx(closed, rel=1e-14)
    assert K.kernel_J_quadrature(x, np.zeros(d), 0.0).value == pytest.approx(closed, rel=1e-9)


@settings(max_examples=40)
@given(st.integers(3, 6), st.data())
def test_J_bessel_vs_quadrature(d, data):
    x = data.draw(vec(d).filter(lambda v: np.linalg.norm(v) > 0.05))
    w = data.draw(vec(d))
    lam = data.draw(st.sampled_from([0.0, 0.5, 1.0]))
    if lam == 0 and np.linalg.norm(w) == 0:
        w = e(0, d)
    a = K.kernel_J(x, w, lam).log_value
    b = K.kernel_J_quadrature(x, w, lam).log_value
    assert abs(math.expm1(a - b)) <= 1e-8


def test_J_over_K_bracket():
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(200):
        d = int(rng.integers(3, 7))
        x, w = rng.normal(size=d) * 2, rng.normal(size=d) * 2
        ratios.append(K.kernel_J(x, w).value / K.kernel_K(x, w).value)
    ratios = np.array(ratios)
    assert ratios.min() > 0.05 and ratios.max() < 50


def test_J_rejects_origin():
    with pytest.raises(ValueError):
        K.kernel_J(np.zeros(3), e(0, 3))
