import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from heatbridge import gaussexp as G
from heatbridge import potentials as P


def mc_reference(V, m, sigma, n=400_000, seed=11):
    rng = np.random.default_rng(seed)
    Z = m + sigma * rng.standard_normal((n, V.dim))
    v = np.abs(P.values(V, Z))
    return v.mean(), v.std() / math.sqrt(n)


def test_constant():
    assert G.expectation(P.Constant(3, -2.0), np.zeros(3), 1.0).value == 2.0


@settings(max_examples=25)
@given(st.floats(0, 4), st.floats(0.05, 5), st.integers(3, 6))
def test_indicator_is_noncentral_chi2_cdf(r, sigma, d):
    m = np.zeros(d)
    m[0] = r
    ref = stats.ncx2.cdf(1.5 ** 2 / sigma ** 2, d, (r / sigma) ** 2) if r > 0 else \
        stats.chi2.cdf(1.5 ** 2 / sigma ** 2, d)
    got = G.expectation(P.IndicatorBall(d, -3.0, 1.5), m, sigma).value
    assert got == pytest.approx(3.0 * ref, rel=1e-8, abs=1e-300)


def test_radial_power_at_centre_closed_form():
    # E|Z|^-1 for Z ~ N(0, sigma^2 I_3) is sqrt(2/pi)/sigma
    got = G.expectation(P.RadialPower(3, 1.0, 1.0), np.zeros(3), 2.0).value
    assert got == pytest.approx(math.sqrt(2 / math.pi) / 2.0, rel=1e-10)


def test_radial_power_off_centre_closed_form():
    # Newtonian-type identity in d=3: E|Z|^-1 = erf(|m| / (sigma sqrt 2)) / |m|
    m = np.array([1.3, 0.0, 0.0])
    got = G.expectation(P.RadialPower(3, 1.0, 1.0), m, 0.7).value
    assert got == pytest.approx(math.erf(1.3 / (0.7 * math.sqrt(2))) / 1.3, rel=1e-10)


def test_truncated_radial_against_1d_quadrature():
    V = P.RadialPower(3, -0.5, 1.5, 1.0, 0.2)
    m, sigma = np.array([0.3, 0.4, 0.0]), 0.6
    r0 = 0.5
    # noncentral chi density with 3 dof, scaled
    dens = lambda r: r / (r0 * sigma * math.sqrt(2 * math.pi)) * (
        math.exp(-(r - r0) ** 2 / (2 * sigma ** 2)) - math.exp(-(r + r0) ** 2 / (2 * sigma ** 2)))
    ref, _ = integrate.quad(lambda r: 0.5 * r ** -1.5 * dens(r), 0.2, 1.0, epsabs=0, epsrel=1e-12)
    assert G.expectation(V, m, sigma).value == pytest.approx(ref, rel=1e-9)


def test_tensor_factorizes():
    V = P.example_5_1(2.0)
    m, sigma = np.array([0.2, 0.5, -0.3]), 0.4
    a = G.expectation(V.factors[0], m[:1], sigma).value
    b = G.expectation(V.factors[1], m[1:], sigma).value
    assert G.expectation(V, m, sigma).value == pytest.approx(a * b, rel=1e-14)


def test_dilate_scaling():
    inner = P.IndicatorBall(4, 1.0, 1.0)
    m, sigma, s = np.array([0.5, 0, 0, 0]), 0.3, 2.5
    got = G.expectation(P.Dilate(4, s, inner), m, sigma).value
    assert got == pytest.approx(s * G.expectation(inner, math.sqrt(s) * m, math.sqrt(s) * sigma).value,
                                rel=1e-14)


@pytest.mark.parametrize("V, m, sigma", [
    (P.SlabCounterexample(4), np.array([6.0, 0.5, 0, 0]), 1.5),
    (P.ShiftedRadialDecay(3, -1.0, 3.0), np.array([1.0, 2.0, 0.0]), 1.0),
    (P.example_5_3(4), np.array([0.0, 0.5, 0.5, 0.0]), 0.8),
    (P.PositivePart(3, P.WeightedSum(3, ((1.0, P.Constant(3, 1.0)), (-2.0, P.IndicatorBall(3, 1.0, 1.0))))),
     np.zeros(3), 1.0),
])
def test_routes_against_monte_carlo(V, m, sigma):
    ref, se = mc_reference(V, m, sigma)
    got = G.expectation(V, m, sigma)
    assert abs(got.value - ref) <= 5 * se + 3 * got.error + 1e-12


def test_degenerate_sigma():
    V = P.RadialPower(3, 1.0, 1.0)
    assert G.expectation(V, np.array([2.0, 0, 0]), 0.0).value == 0.5
    with pytest.raises(ValueError):
        G.expectation(V, np.zeros(3), 0.0)


def test_expectation_product_error_propagation():
    a, b = G.Expectation(2.0, 0.1), G.Expectation(3.0, 0.2)
    c = a * b
    assert c.value == 6.0 and c.error == pytest.approx(2 * 0.2 + 3 * 0.1 + 0.02)
