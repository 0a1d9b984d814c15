import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatbridge import potentials as P

SPECS = [
    P.Constant(3, -2.0),
    P.RadialPower(3, 1.5, 1.0, 2.0, 0.25),
    P.IndicatorBall(4, -1.0, 1.0),
    P.SlabCounterexample(4),
    P.ShiftedRadialDecay(3, -1.0, 3.0),
    P.example_5_1(2.0),
    P.example_5_3(4),
    P.example_5_4(0.5),
    P.WeightedSum(3, ((0.5, P.IndicatorBall(3, 1.0, 1.0)), (-1.0, P.RadialPower(3, 1.0, 2.0, 1.0)))),
    P.Dilate(4, 2.0, P.IndicatorBall(4, 1.0, 1.0)),
    P.PositivePart(3, P.WeightedSum(3, ((1.0, P.Constant(3, 1.0)), (-2.0, P.IndicatorBall(3, 1.0, 1.0))))),
]


def pts(d, n=50, seed=0, scale=3.0):
    return np.random.default_rng(seed).normal(size=(n, d)) * scale


# --------------------------------------------------------------------------
# grammar


@pytest.mark.parametrize("V", SPECS, ids=lambda V: type(V).__name__)
def test_round_trip(V):
    W = P.parse_potential(P.dumps(V))
    assert W == V
    assert P.dumps(W) == P.dumps(V)


@pytest.mark.parametrize("obj, path", [
    ({"type": "nope", "dim": 3}, "/type"),
    ({"type": "constant", "value": 1.0}, "/dim"),
    ({"type": "constant", "dim": 0, "value": 1.0}, "/dim"),
    ({"type": "constant", "dim": 3}, "/value"),
    ({"type": "constant", "dim": 3, "value": 1.0, "extra": 1}, "/extra"),
    ({"type": "constant", "dim": 3, "value": "1"}, "/value"),
    ({"type": "indicator_ball", "dim": 3, "coeff": 1.0, "radius": -1.0}, "/radius"),
    ({"type": "radial_power", "dim": 3, "coeff": 1.0, "exponent": 1.0, "radius": 1.0, "inner_radius": 2.0},
     "/inner_radius"),
    ({"type": "slab_counterexample", "dim": 3}, "/dim"),
    ({"type": "tensor", "dim": 4, "factors": [{"type": "constant", "dim": 1, "value": 1.0}]}, "/factors"),
    ({"type": "weighted_sum", "dim": 3, "terms": [{"weight": 1.0, "spec": {"type": "constant", "dim": 2,
                                                                            "value": 1.0}}]},
     "/terms/0/spec/dim"),
    ({"type": "dilate", "dim": 3, "s": 0.0, "inner": {"type": "constant", "dim": 3, "value": 1.0}}, "/s"),
])
def test_spec_errors_carry_pointer(obj, path):
    with pytest.raises(P.SpecError) as exc:
        P.from_dict(obj)
    assert exc.value.path == path


def test_invalid_json():
    with pytest.raises(P.SpecError):
        P.parse_potential("{not json")


def test_example_configs_parse():
    from pathlib import Path

    folder = Path(__file__).resolve().parents[1] / "configs" / "potentials"
    files = sorted(folder.glob("*.json"))
    assert files
    for f in files:
        V = P.parse_potential(f.read_text())
        assert P.from_dict(json.loads(P.dumps(V))) == V


# --------------------------------------------------------------------------
# evaluation


def test_values_of_basic_nodes():
    Z = np.array([[0.5, 0, 0], [2.0, 0, 0], [0, 3.0, 0]])
    np.testing.assert_allclose(P.values(P.IndicatorBall(3, 2.0, 1.0), Z), [2.0, 0, 0])
    np.testing.assert_allclose(P.values(P.RadialPower(3, 1.0, 2.0), Z), [4.0, 0.25, 1 / 9])
    np.testing.assert_allclose(P.values(P.ShiftedRadialDecay(3, -1.0, 3.0), Z), [-1 / 3.375, -1 / 27, -1 / 64])


def test_slab_values():
    V = P.SlabCounterexample(4)
    Z = np.array([[5.0, 2.0, 0, 0], [5.0, 3.0, 0, 0], [3.0, 0, 0, 0], [9.0, 0, 0, 2.9]])
    np.testing.assert_allclose(P.values(V, Z), [-0.2, 0.0, 0.0, -1 / 9])


@given(st.floats(0.1, 10), st.integers(0, 1000))
def test_dilate_law(s, seed):
    inner = P.ShiftedRadialDecay(3, -1.0, 2.0)
    Z = pts(3, 10, seed)
    np.testing.assert_allclose(P.values(P.Dilate(3, s, inner), Z), s * P.values(inner, math.sqrt(s) * Z),
                               rtol=1e-14)


def test_tensor_is_product_of_factors():
    V = P.example_5_4(0.5)
    Z = pts(6, 40, 1, 0.5)
    f = V.factors[0]
    np.testing.assert_allclose(P.values(V, Z), P.values(f, Z[:, :3]) * P.values(f, Z[:, 3:]))


@pytest.mark.parametrize("V", SPECS, ids=lambda V: type(V).__name__)
def test_sign_split_reconstructs(V):
    plus, minus = P.sign_split(V)
    Z = pts(V.dim, 200, 2)
    Z = Z[P.distance_to_singular_set(V, Z) > 1e-9]
    v = P.values(V, Z)
    a, b = P.values(plus, Z), P.values(minus, Z)
    np.testing.assert_allclose(a - b, v, rtol=1e-12, atol=1e-300)
    assert np.all(a >= 0) and np.all(b >= 0)
    np.testing.assert_allclose(P.values(P.absolute(V), Z), np.abs(v), rtol=1e-12)


def test_sign_of():
    assert P.sign_of(P.Constant(3, 0.0)) == 0
    assert P.sign_of(P.IndicatorBall(3, 1.0, 1.0)) == 1
    assert P.sign_of(P.example_5_1(2.0)) == -1
    assert P.sign_of(SPECS[8]) is None


def test_negate_folds_coefficients():
    assert P.negate(P.IndicatorBall(3, 2.0, 1.0)) == P.IndicatorBall(3, -2.0, 1.0)
    Z = pts(4, 20, 3)
    V = P.example_5_3(4)
    np.testing.assert_allclose(P.values(P.negate(V), Z), -P.values(V, Z))


# --------------------------------------------------------------------------
# L^p norms


def test_lp_closed_forms():
    ball = P.IndicatorBall(3, -2.0, 1.0)
    assert P.lp_norm(ball, 1).value == pytest.approx(2 * 4 * math.pi / 3, rel=1e-14)
    assert P.lp_norm(ball, 2).value == pytest.approx(2 * math.sqrt(4 * math.pi / 3), rel=1e-14)
    assert P.lp_norm(ball, math.inf).value == 2.0
    # |x|^-1 on the unit ball of R^3: ||.||_2^2 = 4 pi
    assert P.lp_norm(P.RadialPower(3, 1.0, 1.0, 1.0), 2).value == pytest.approx(math.sqrt(4 * math.pi))
    # r^-4 r^2 dr diverges at 0
    assert P.lp_norm(P.RadialPower(3, 1.0, 2.0, 1.0), 2).value == math.inf
    assert P.lp_norm(P.Constant(3, 1.0), 2).value == math.inf
    assert P.lp_norm(P.Constant(3, 0.0), 2).value == 0.0


def test_lp_tensor_factorizes():
    V = P.example_5_1(2.0)
    n = P.lp_norm(V, 1.5).value
    a, b = (P.lp_norm(f, 1.5).value for f in V.factors)
    assert n == pytest.approx(a * b, rel=1e-12)


def test_lp_by_quadrature_matches_closed_form():
    # a dilated ball: ||s f(sqrt s .)||_p = s^{1 - d/(2p)} ||f||_p
    f = P.IndicatorBall(3, 1.0, 1.0)
    s = 4.0
    got = P.lp_norm(P.Dilate(3, s, f), 2).value
    assert got == pytest.approx(s ** (1 - 3 / 4) * P.lp_norm(f, 2).value, rel=1e-6)


def test_lp_rejects_small_p():
    with pytest.raises(ValueError):
        P.lp_norm(P.Constant(3, 1.0), 0.5)


# --------------------------------------------------------------------------
# builders


def test_builders():
    assert P.example_5_1(2.0).dim == 3
    with pytest.raises(ValueError):
        P.example_5_1(1.0)
    V = P.example_5_2(4, {2: 1.0, 3: 2.0, 4: 4.0})
    assert len(V.terms) == 3 and V.terms[1][0] == pytest.approx(-1 / 18)
    assert P.example_5_3(3) == P.ShiftedRadialDecay(3, -1.0, 3.0)
    assert P.example_5_4(0.3).dim == 6
    C = P.counterexample_compact(3, {1: 0.5, 2: 0.25, 3: 0.125})
    assert len(C.terms) == 3
    with pytest.raises(ValueError):
        P.build_example("nothing")
    assert P.build_example("example_5_3", d=5).dim == 5


@settings(max_examples=30)
@given(st.integers(0, 10 ** 6))
def test_compact_counterexample_support(seed):
    C = P.counterexample_compact(4, {n: 2.0 ** -n for n in range(1, 5)})
    Z = pts(4, 50, seed)
    outside = np.linalg.norm(Z, axis=1) > 1
    assert np.all(P.values(C, Z[outside]) == 0)
