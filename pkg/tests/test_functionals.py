import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatbridge import functionals as F
from heatbridge import potentials as P

BALL3 = P.IndicatorBall(3, -1.0, 1.0)
BALL4 = P.IndicatorBall(4, -1.0, 1.0)


def e(i, d):
    v = np.zeros(d)
    v[i] = 1.0
    return v


# --------------------------------------------------------------------------
# S


def test_S_constant_is_linear_in_t():
    assert F.S_bridge(P.Constant(3, -2.0), 1.5, np.zeros(3), e(0, 3)).value == 3.0


def test_S_zero_potential():
    assert F.S_bridge(P.Constant(3, 0.0), 1.0, np.zeros(3), np.zeros(3)).value == 0.0


def test_S_ball_at_origin_frozen():
    # int_0^1 P(chi^2_3 <= 1/(2 s(1-s))) ds by an independent 1-d quadrature
    got = F.S_bridge(BALL3, 1.0, np.zeros(3), np.zeros(3), F.QuadratureConfig(rel_tol=1e-10))
    assert got.value == pytest.approx(0.6321205588285578, rel=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6), st.floats(0.1, 5))
def test_S_symmetric_in_endpoints(c, t):
    x, y = np.array(c[:3]), np.array(c[3:])
    a = F.S_bridge(BALL3, t, x, y).value
    b = F.S_bridge(BALL3, t, y, x).value
    assert a == pytest.approx(b, rel=1e-6, abs=1e-12)


def test_S_singular_potential_finite():
    V = P.RadialPower(3, -1.0, 1.0, 1.0)
    r = F.S_bridge(V, 1.0, np.zeros(3), np.zeros(3))
    assert math.isfinite(r.value) and r.value > 0 and r.converged


def test_bridge_semigroup_under_sup_bound():
    norm = P.lp_norm(BALL3, 2.0).value
    for s in (0.1, 0.5, 0.9):
        v = F.bridge_semigroup(BALL3, s, 1.0, np.zeros(3), 0.3 * e(0, 3))
        assert v <= F.bridge_sup_bound(3, 2.0, s, 1.0, norm)


# --------------------------------------------------------------------------
# N


def test_N_swap_identity_matches_direct_second_piece():
    x, y = np.array([0.2, 0.0, 0.1]), np.array([-0.5, 0.3, 0.0])
    a = F.N_functional(BALL3, 1.3, x, y).value
    b = F.N_functional(BALL3, 1.3, x, y, use_symmetry=False).value
    assert a == pytest.approx(b, rel=1e-6)


def test_N_constant_closed_form():
    # each piece is (4pi)^{d/2} |c| t/2
    v1, v2 = F.N_pieces(P.Constant(3, 1.0), 2.0, np.zeros(3), e(0, 3))
    assert v1 == pytest.approx((4 * math.pi) ** 1.5, rel=1e-8)
    assert v2 == pytest.approx(v1, rel=1e-8)


# --------------------------------------------------------------------------
# heat and Newtonian potentials


def test_newtonian_ball_closed_forms():
    # C_3 int_{|z|<1} |z - x|^-1 dz: 1/2 at the centre, vol/(4 pi |x|) outside
    assert F.newtonian_potential(BALL3, np.zeros(3)).value == pytest.approx(0.5, rel=1e-8)
    assert F.newtonian_potential(BALL3, 2 * e(0, 3)).value == pytest.approx(1 / 6, rel=1e-8)


def test_heat_potential_tends_to_newtonian():
    x = 0.5 * e(1, 3)
    newt = F.newtonian_potential(BALL3, x).value
    assert F.heat_potential(BALL3, math.inf, x).value == pytest.approx(newt, rel=1e-6)
    # tail int_T^inf (4 pi s)^{-3/2} vol ds ~ vol / (4 pi^{3/2} sqrt T)
    T = 1e4
    tail = (4 * math.pi / 3) * 2 * (4 * math.pi) ** -1.5 / math.sqrt(T)
    assert F.heat_potential(BALL3, T, x).value == pytest.approx(newt - tail, rel=1e-4)


def test_heat_potential_constant():
    assert F.heat_potential(P.Constant(3, 2.0), 3.0, np.zeros(3)).value == 6.0
    with pytest.raises(ValueError):
        F.heat_potential(P.Constant(3, 2.0), math.inf, np.zeros(3))


@pytest.mark.parametrize("x1, ref", [(4.0, 0.31491426641894761), (100.0, 0.49994058304164582)])
def test_slab_newtonian_frozen(x1, ref):
    # rho-integral of 4 pi rho^2 / (a^2 + rho^2) in closed form, then 30-digit quadrature in z1
    got = F.newtonian_potential(P.SlabCounterexample(4), x1 * e(0, 4), F.QuadratureConfig(rel_tol=1e-9))
    assert got.value == pytest.approx(ref, rel=1e-9)


def test_newtonian_needs_d3():
    with pytest.raises(ValueError):
        F.newtonian_potential(P.IndicatorBall(2, 1.0, 1.0), np.zeros(2))


# --------------------------------------------------------------------------
# K


@pytest.mark.parametrize("V, x", [
    (BALL4, 0.5 * e(0, 4)),
    (P.RadialPower(3, 1.0, 1.0, 1.0), 2 * e(1, 3)),
    (P.ShiftedRadialDecay(3, -1.0, 3.0), np.zeros(3)),
])
def test_K_at_y_zero_is_newtonian_over_C_d(V, x):
    k = F.K_functional(V, x, np.zeros(V.dim)).value
    n = F.newtonian_potential(V, x).value
    assert k * F.C_d(V.dim) == pytest.approx(n, rel=1e-6)


@pytest.mark.parametrize("s", [0.25, 4.0])
def test_K_dilatation_law(s):
    # K(u / sqrt s, y) = s^{(d-2)/2} K(u, y / sqrt s), which gives
    # K(d_s V, x, y) = K(V, sqrt(s) x, y / sqrt(s))
    x, y = 0.3 * e(0, 4), 0.8 * e(0, 4)
    a = F.K_functional(P.Dilate(4, s, BALL4), x, y).value
    b = F.K_functional(BALL4, math.sqrt(s) * x, y / math.sqrt(s)).value
    assert a == pytest.approx(b, rel=1e-6)


def test_K_truncation_monotone():
    V = P.ShiftedRadialDecay(3, -1.0, 2.5)
    vals = [F.K_functional(V, np.zeros(3), e(0, 3), truncation_radius=R).value for R in (1, 10, 100, math.inf)]
    assert vals == sorted(vals)


def test_K_slab_truncated_grows_with_radius():
    V = P.SlabCounterexample(4)
    vals = [F.K_functional(V, np.zeros(4), np.zeros(4), truncation_radius=R).value for R in (1e2, 1e3, 1e4)]
    assert vals[0] < vals[1] < vals[2]


# --------------------------------------------------------------------------
# e*


@pytest.mark.parametrize("V", [BALL3, BALL4, P.ShiftedRadialDecay(3, -1.0, 3.0)], ids=str)
def test_e_star_integral_without_drift_is_newtonian(V):
    y = np.zeros(V.dim)
    a = F.e_star_integral(V, 0.0, y, np.zeros(V.dim)).value
    assert a == pytest.approx(F.newtonian_potential(V, y).value, rel=1e-7)


def test_e_star_integral_constant_with_damping():
    assert F.e_star_integral(P.Constant(3, 2.0), 4.0, np.zeros(3), e(0, 3)).value == 0.5


def test_e_star_integral_truncation_monotone():
    vals = [F.e_star_integral(BALL3, 0.0, np.zeros(3), e(0, 3), tau_max=T).value for T in (1, 16, 256, math.inf)]
    assert vals == sorted(vals)


# --------------------------------------------------------------------------
# constants


def test_C_d_and_C_dp():
    assert F.C_d(3) == pytest.approx(1 / (4 * math.pi))
    assert F.C_dp(3, 1) == pytest.approx((4 * math.pi) ** -1.5)
    assert F.C_dp(3, math.inf) == 1.0
    # ||g(1, 0, .)||_2 = (8 pi)^{-3/4} by direct Gaussian integral
    assert F.C_dp(3, 2) == pytest.approx((8 * math.pi) ** -0.75, rel=1e-14)
    with pytest.raises(ValueError):
        F.C_dp(3, 0.5)


@given(st.integers(1, 6), st.floats(1.01, 50))
def test_C_dp_is_conjugate_norm_of_heat_kernel(d, p):
    # ||g(1,0,.)||_q with q = p/(p-1): (4 pi)^{-d/2} (4 pi / q)^{d/(2q)}
    q = p / (p - 1)
    ref = (4 * math.pi) ** (-d / 2) * (4 * math.pi / q) ** (d / (2 * q))
    assert F.C_dp(d, p) == pytest.approx(ref, rel=1e-12)


def test_kappa_4_frozen():
    # independent dblquad in (r, cos theta), error ~4e-5 absolute
    val, err = F.kappa(4)
    assert val == pytest.approx(5.157075389509055, abs=1e-4)
    assert err < 1e-6


def test_kappa_needs_d4():
    with pytest.raises(ValueError):
        F.kappa(3)


def test_constants_cache_round_trip(tmp_path):
    path = tmp_path / "k.json"
    a = F.constants(4, cache_path=path)
    b = F.constants(4, cache_path=path)
    assert a.kappa_d == b.kappa_d and "cache" in b.notes[-1]
    doc = json.loads(path.read_text())
    assert "4" in doc["kappa"]


def test_constants_table_d3():
    t = F.constants(3, ["1", "inf"])
    assert t.kappa_d is None and set(t.to_dict()["C_dp"]) == {"1.0", "inf"}


# --------------------------------------------------------------------------
# bound constants


def test_theorem_bound_validation():
    with pytest.raises(ValueError):
        F.theorem_bound("zhang_a", {"d": 3, "p": 1.0}, {"V": 1.0})
    with pytest.raises(ValueError):
        F.theorem_bound("nope", {}, {})
    prm = F.example_5_1_parameters(3.0, 1.2, 1.5)
    assert prm["d1"] / (2 * prm["p1"]) + prm["d2"] / (2 * prm["p2"]) == pytest.approx(1.0)
    assert F.theorem_bound("tensor_a", prm, {"V1": 1.0, "V2": 1.0}) > 0


def test_single_potential_bound_dominates_S_at_origin():
    p = 2.0
    c = F.theorem_bound("zhang_a", {"d": 3, "p": p}, {"V": P.lp_norm(BALL3, p).value})
    expo = F.bound_exponent("zhang_a", {"d": 3, "p": p})
    for t in (0.1, 1.0, 10.0):
        assert F.S_bridge(BALL3, t, np.zeros(3), np.zeros(3)).value <= c * t ** expo


# --------------------------------------------------------------------------
# export


def test_csv_text():
    row = {"functional": "S", "potential_id": F.potential_id(BALL3), "t": 1.0, "x": [0.0, 0.0, 0.0],
           "y": [0.0, 0.0, 0.0], "value": 0.5, "error": 1e-9, "method": "quadrature"}
    text = F.csv_text([row])
    lines = text.strip().splitlines()
    assert lines[0] == ",".join(F.CSV_FIELDS) and len(lines) == 2
