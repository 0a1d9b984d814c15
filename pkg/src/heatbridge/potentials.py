"""A closed grammar of potentials V: R^d -> R.

Specs are frozen dataclasses; every node carries its dimension. Evaluation is
vectorized over the leading axes of an ``(..., dim)`` array. The JSON form uses
``{"dim": d, "type": <node>, ...}`` and round-trips exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from .kernels import as_point, sphere_area, MAX_DIM

INF = math.inf


class SpecError(ValueError):
    """Schema violation; `path` is a JSON pointer to the offending node."""

    def __init__(self, message: str, path: str = ""):
        self.path = path or "/"
        super().__init__(f"{self.path}: {message}")


def _check_dim(dim):
    if not isinstance(dim, int) or isinstance(dim, bool) or not 1 <= dim <= MAX_DIM:
        raise SpecError(f"dim must be an integer in [1, {MAX_DIM}], got {dim!r}")


@dataclass(frozen=True)
class Constant:
    dim: int
    value: float


@dataclass(frozen=True)
class RadialPower:
    """coeff * |x|^-exponent on inner_radius <= |x| < radius."""

    dim: int
    coeff: float
    exponent: float
    radius: float = INF
    inner_radius: float = 0.0


@dataclass(frozen=True)
class IndicatorBall:
    dim: int
    coeff: float
    radius: float


@dataclass(frozen=True)
class SlabCounterexample:
    """-(1/z1) on {z1 > 4, |z_rest| <= sqrt(z1)}, optionally cut to the ball B(0, radius)."""

    dim: int
    radius: float = INF


@dataclass(frozen=True)
class ShiftedRadialDecay:
    """coeff * (|x| + 1)^-power."""

    dim: int
    coeff: float
    power: float


@dataclass(frozen=True)
class Tensor:
    dim: int
    factors: tuple


@dataclass(frozen=True)
class WeightedSum:
    dim: int
    terms: tuple  # of (weight, spec)


@dataclass(frozen=True)
class Dilate:
    """(d_s f)(x) = s f(sqrt(s) x)."""

    dim: int
    s: float
    inner: object


@dataclass(frozen=True)
class PositivePart:
    """max(0, inner); needed to split mixed-sign sums."""

    dim: int
    inner: object


NODE_TYPES = {
    "constant": Constant,
    "radial_power": RadialPower,
    "indicator_ball": IndicatorBall,
    "slab_counterexample": SlabCounterexample,
    "shifted_radial_decay": ShiftedRadialDecay,
    "tensor": Tensor,
    "weighted_sum": WeightedSum,
    "dilate": Dilate,
    "positive_part": PositivePart,
}
TYPE_NAMES = {cls: name for name, cls in NODE_TYPES.items()}


def zero(dim: int) -> Constant:
    return Constant(dim, 0.0)


def negate(V):
    """A spec for -V, folding into the node's coefficient where possible."""
    if isinstance(V, Constant):
        return Constant(V.dim, -V.value)
    if isinstance(V, (RadialPower, IndicatorBall, ShiftedRadialDecay)):
        return _replace(V, coeff=-V.coeff)
    if isinstance(V, WeightedSum):
        return WeightedSum(V.dim, tuple((-w, t) for w, t in V.terms))
    if isinstance(V, Dilate):
        return Dilate(V.dim, V.s, negate(V.inner))
    if isinstance(V, Tensor):
        return Tensor(V.dim, (negate(V.factors[0]),) + tuple(V.factors[1:]))
    return WeightedSum(V.dim, ((-1.0, V),))


def _replace(V, **changes):
    from dataclasses import replace

    return replace(V, **changes)


# --------------------------------------------------------------------------
# evaluation


def values(V, Z) -> np.ndarray:
    """Vectorized values of V on points Z of shape (..., dim).

    RadialPower singular points evaluate to -inf/+inf by the sign of coeff.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.shape[-1] != V.dim:
        raise ValueError(f"dimension mismatch: spec has dim {V.dim}, points have {Z.shape[-1]}")
    if isinstance(V, Constant):
        return np.full(Z.shape[:-1], float(V.value))
    if isinstance(V, Tensor):
        out = np.ones(Z.shape[:-1])
        start = 0
        for f in V.factors:
            out = out * values(f, Z[..., start:start + f.dim])
            start += f.dim
        return out
    if isinstance(V, WeightedSum):
        out = np.zeros(Z.shape[:-1])
        for w, term in V.terms:
            out = out + w * values(term, Z)
        return out
    if isinstance(V, Dilate):
        return V.s * values(V.inner, math.sqrt(V.s) * Z)
    if isinstance(V, PositivePart):
        return np.maximum(values(V.inner, Z), 0.0)
    if isinstance(V, SlabCounterexample):
        z1 = Z[..., 0]
        rest2 = np.sum(Z[..., 1:] ** 2, axis=-1)
        inside = (z1 > 4) & (rest2 <= z1)
        if V.radius < INF:
            inside &= (z1 * z1 + rest2) < V.radius ** 2
        with np.errstate(divide="ignore"):
            return np.where(inside, -1.0 / np.where(inside, z1, 1.0), 0.0)
    r = np.sqrt(np.sum(Z * Z, axis=-1))
    return radial_profile(V).signed(r)


def evaluate(V, z) -> float:
    """Pointwise value V(z); raises at a RadialPower singularity."""
    z = as_point(z, V.dim)
    if any(np.all(z[sl] == 0) for sl in singular_slices(V)):
        raise ValueError(f"{z} lies on the singular set of the potential")
    return float(values(V, z[None, :])[0])


# --------------------------------------------------------------------------
# radial structure


@dataclass
class RadialProfile:
    """A radial function f(|x|) with its quadrature-relevant structure.

    `alpha0` is the order of the singularity at r = 0 (f ~ r^-alpha0),
    `breaks` the radii where f is not smooth and `support` the outer radius.
    """

    signed: Callable[[np.ndarray], np.ndarray]
    breaks: tuple = ()
    alpha0: float = 0.0
    support: float = INF
    tail_power: float = 0.0  # f = O(r^-tail_power) at infinity
    inner_support: float = 0.0  # f = 0 on r < inner_support

    def absolute(self, r):
        return np.abs(self.signed(r))


def is_radial(V) -> bool:
    if isinstance(V, (Constant, RadialPower, IndicatorBall, ShiftedRadialDecay)):
        return True
    if isinstance(V, (Dilate, PositivePart)):
        return is_radial(V.inner)
    if isinstance(V, WeightedSum):
        return all(is_radial(t) for _, t in V.terms)
    if isinstance(V, Tensor):
        return len(V.factors) == 1 and is_radial(V.factors[0])
    return False


def radial_profile(V) -> RadialProfile:
    """The radial profile of a rotation-invariant spec."""
    if isinstance(V, Constant):
        c = float(V.value)
        return RadialProfile(lambda r: np.full(np.shape(r), c), support=INF if c else 0.0)
    if isinstance(V, IndicatorBall):
        c, R = float(V.coeff), float(V.radius)
        return RadialProfile(lambda r: np.where(np.asarray(r) < R, c, 0.0), breaks=(R,), support=R)
    if isinstance(V, RadialPower):
        c, a, R, r0 = float(V.coeff), float(V.exponent), float(V.radius), float(V.inner_radius)

        def f(r):
            r = np.asarray(r, dtype=float)
            inside = (r >= r0) & (r < R)
            with np.errstate(divide="ignore"):
                return np.where(inside, c * np.where(inside, r, 1.0) ** (-a), 0.0)

        breaks = tuple(b for b in (r0, R) if 0 < b < INF)
        return RadialProfile(f, breaks=breaks, alpha0=a if r0 == 0 else 0.0, support=R,
                             tail_power=a if R == INF else 0.0, inner_support=r0)
    if isinstance(V, ShiftedRadialDecay):
        c, p = float(V.coeff), float(V.power)
        # r = 1 is the profile's length scale, not a kink; declared so quadratures resolve it
        return RadialProfile(lambda r: c * (np.asarray(r, dtype=float) + 1.0) ** (-p), breaks=(1.0,),
                             tail_power=p)
    if isinstance(V, Dilate):
        inner = radial_profile(V.inner)
        s, rs = float(V.s), math.sqrt(V.s)
        return RadialProfile(
            lambda r: s * inner.signed(rs * np.asarray(r, dtype=float)),
            breaks=tuple(b / rs for b in inner.breaks), alpha0=inner.alpha0,
            support=inner.support / rs, tail_power=inner.tail_power,
            inner_support=inner.inner_support / rs,
        )
    if isinstance(V, PositivePart):
        inner = radial_profile(V.inner)
        return RadialProfile(lambda r: np.maximum(inner.signed(r), 0.0), inner.breaks,
                             inner.alpha0, inner.support, inner.tail_power, inner.inner_support)
    if isinstance(V, WeightedSum):
        parts = [(float(w), radial_profile(t)) for w, t in V.terms]

        def f(r):
            out = np.zeros(np.shape(r))
            for w, p in parts:
                out = out + w * p.signed(r)
            return out

        breaks = tuple(sorted({b for _, p in parts for b in p.breaks}))
        return RadialProfile(
            f, breaks=breaks, alpha0=max((p.alpha0 for _, p in parts), default=0.0),
            support=max((p.support for _, p in parts), default=0.0),
            tail_power=min((p.tail_power for _, p in parts if p.support == INF), default=0.0),
            inner_support=min((p.inner_support for _, p in parts), default=0.0),
        )
    if isinstance(V, Tensor) and len(V.factors) == 1:
        return radial_profile(V.factors[0])
    raise TypeError(f"{type(V).__name__} is not radial")


# --------------------------------------------------------------------------
# sign, support and singular set


def sign_of(V) -> int | None:
    """+1 if V >= 0, -1 if V <= 0, 0 if V == 0, None when mixed or undetermined."""
    if isinstance(V, Constant):
        return int(np.sign(V.value))
    if isinstance(V, (RadialPower, IndicatorBall, ShiftedRadialDecay)):
        return int(np.sign(V.coeff))
    if isinstance(V, SlabCounterexample):
        return -1
    if isinstance(V, Dilate):
        return sign_of(V.inner)
    if isinstance(V, PositivePart):
        inner = sign_of(V.inner)
        return 0 if inner in (0, -1) else 1
    if isinstance(V, Tensor):
        sign = 1
        for f in V.factors:
            sf = sign_of(f)
            if sf is None:
                return None
            sign *= sf
        return sign
    if isinstance(V, WeightedSum):
        signs = set()
        for w, t in V.terms:
            st = sign_of(t)
            if st is None:
                return None
            signs.add(int(np.sign(w)) * st)
        signs.discard(0)
        if len(signs) > 1:
            return None
        return signs.pop() if signs else 0
    raise TypeError(f"unknown spec node {type(V).__name__}")


def support_radius(V) -> float:
    """Radius of a centered ball containing the support of V (inf if unbounded)."""
    if isinstance(V, Constant):
        return 0.0 if V.value == 0 else INF
    if isinstance(V, (RadialPower, IndicatorBall)):
        return 0.0 if V.coeff == 0 else float(V.radius)
    if isinstance(V, ShiftedRadialDecay):
        return 0.0 if V.coeff == 0 else INF
    if isinstance(V, SlabCounterexample):
        return float(V.radius)
    if isinstance(V, Dilate):
        return support_radius(V.inner) / math.sqrt(V.s)
    if isinstance(V, PositivePart):
        return support_radius(V.inner)
    if isinstance(V, Tensor):
        radii = [support_radius(f) for f in V.factors]
        if any(r == 0 for r in radii):
            return 0.0
        return math.sqrt(sum(r * r for r in radii))
    if isinstance(V, WeightedSum):
        return max((support_radius(t) for w, t in V.terms if w != 0), default=0.0)
    raise TypeError(f"unknown spec node {type(V).__name__}")


def singular_slices(V, offset: int = 0) -> list[slice]:
    """Coordinate blocks whose simultaneous vanishing is a singularity of V.

    A RadialPower with a positive exponent and no inner cutoff is singular at the
    origin of its own coordinates; inside a Tensor that is a coordinate subspace.
    """
    if isinstance(V, RadialPower):
        if V.exponent > 0 and V.inner_radius == 0 and V.coeff != 0:
            return [slice(offset, offset + V.dim)]
        return []
    if isinstance(V, (Dilate, PositivePart)):
        return singular_slices(V.inner, offset)
    if isinstance(V, Tensor):
        out, start = [], offset
        for f in V.factors:
            out += singular_slices(f, start)
            start += f.dim
        return out
    if isinstance(V, WeightedSum):
        seen, out = set(), []
        for _, t in V.terms:
            for sl in singular_slices(t, offset):
                if (sl.start, sl.stop) not in seen:
                    seen.add((sl.start, sl.stop))
                    out.append(sl)
        return out
    return []


def distance_to_singular_set(V, Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    out = np.full(Z.shape[:-1], INF)
    for sl in singular_slices(V):
        out = np.minimum(out, np.sqrt(np.sum(Z[..., sl] ** 2, axis=-1)))
    return out


def sign_split(V):
    """(V+, V-) with V = V+ - V- pointwise."""
    s = sign_of(V)
    if s == 0:
        return zero(V.dim), zero(V.dim)
    if s == 1:
        return V, zero(V.dim)
    if s == -1:
        return zero(V.dim), negate(V)
    return PositivePart(V.dim, V), PositivePart(V.dim, negate(V))


def absolute(V):
    """A spec for |V| where the sign is definite; otherwise V+ + V-."""
    s = sign_of(V)
    if s in (0, 1):
        return V
    if s == -1:
        return negate(V)
    plus, minus = sign_split(V)
    return WeightedSum(V.dim, ((1.0, plus), (1.0, minus)))


# --------------------------------------------------------------------------
# L^p norms


@dataclass(frozen=True)
class LpNormResult:
    p: float
    value: float
    method: str  # closed_form | quadrature


def _ball_volume(d: int, R: float) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * R ** d


def _radial_power_norm(d, c, a, R, r0, p):
    if c == 0:
        return 0.0
    if p == INF:
        if a > 0:
            return INF if r0 == 0 else abs(c) * r0 ** (-a)
        if a == 0:
            return abs(c)
        return INF if R == INF else abs(c) * R ** (-a)
    e = d - a * p  # integrand r^(e-1)
    if r0 == 0 and e <= 0:
        return INF
    if R == INF and e >= 0:
        return INF
    if e == 0:
        integral = math.log(R / r0)
    else:
        integral = ((R ** e if R < INF else 0.0) - (r0 ** e if r0 > 0 else 0.0)) / e
    return abs(c) * (sphere_area(d) * integral) ** (1 / p)


def lp_norm(V, p: float) -> LpNormResult:
    """||V||_p, closed form where the node admits one, otherwise by quadrature."""
    p = float(p)
    if not (p >= 1):
        raise ValueError(f"p must lie in [1, inf], got {p}")
    value, method = _lp(V, p)
    return LpNormResult(p, value, method)


def _lp(V, p):
    d = V.dim
    if isinstance(V, Constant):
        if V.value == 0:
            return 0.0, "closed_form"
        return (abs(V.value) if p == INF else INF), "closed_form"
    if isinstance(V, IndicatorBall):
        if p == INF:
            return abs(V.coeff), "closed_form"
        return abs(V.coeff) * _ball_volume(d, V.radius) ** (1 / p), "closed_form"
    if isinstance(V, RadialPower):
        return _radial_power_norm(d, V.coeff, V.exponent, V.radius, V.inner_radius, p), "closed_form"
    if isinstance(V, ShiftedRadialDecay):
        if V.coeff == 0:
            return 0.0, "closed_form"
        if p == INF:
            return abs(V.coeff), "closed_form"
        q = V.power * p
        if q <= d:
            return INF, "closed_form"
        # int_0^inf r^(d-1) (1+r)^-q dr = B(d, q - d)
        return abs(V.coeff) * (sphere_area(d) * special.beta(d, q - d)) ** (1 / p), "closed_form"
    if isinstance(V, Tensor):
        parts = [_lp(f, p) for f in V.factors]
        vals = [v for v, _ in parts]
        if any(v == 0 for v in vals):
            return 0.0, "closed_form"
        method = "closed_form" if all(m == "closed_form" for _, m in parts) else "quadrature"
        return math.prod(vals), method
    if isinstance(V, Dilate):
        v, m = _lp(V.inner, p)
        scale = V.s if p == INF else V.s ** (1 - d / (2 * p))
        return v * scale, m
    if isinstance(V, SlabCounterexample):
        return _slab_lp(V, p), "quadrature"
    if is_radial(V):
        return _radial_lp_quadrature(radial_profile(V), d, p), "quadrature"
    if isinstance(V, WeightedSum) and p == 1 and sign_of(V) is not None:
        total = 0.0
        for w, t in V.terms:
            total += abs(w) * _lp(t, 1.0)[0]
        return total, "quadrature"
    raise NotImplementedError(f"no L^p route for {type(V).__name__} at p={p}")


def _radial_lp_quadrature(prof: RadialProfile, d: int, p: float) -> float:
    if p == INF:
        grid = np.concatenate([np.geomspace(1e-12, 1e6, 4000), np.asarray(prof.breaks) * (1 - 1e-12)])
        if prof.alpha0 > 0:
            return INF
        return float(np.max(prof.absolute(grid)))
    if prof.alpha0 * p >= d:
        return INF
    if prof.support == INF and prof.tail_power * p <= d:
        return INF
    pts = sorted({0.0, *prof.breaks, *( [prof.support] if prof.support < INF else [])})
    f = lambda r: sphere_area(d) * r ** (d - 1) * prof.absolute(r) ** p
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        total += integrate.quad(f, a, b, limit=200, epsrel=1e-12)[0]
    if prof.support == INF:
        total += integrate.quad(f, pts[-1], INF, limit=200, epsrel=1e-12)[0]
    return total ** (1 / p)


def _slab_lp(V, p):
    d = V.dim
    if p == INF:
        return 0.25
    ball = lambda r: _ball_volume(d - 1, r)

    def section(z1):
        rho2 = z1
        if V.radius < INF:
            rho2 = min(z1, max(V.radius ** 2 - z1 * z1, 0.0))
        return ball(math.sqrt(rho2))

    if V.radius == INF and p <= (d + 1) / 2:
        return INF
    hi = min(V.radius, INF)
    if hi <= 4:
        return 0.0
    val = integrate.quad(lambda z1: z1 ** (-p) * section(z1), 4, hi, limit=400, epsrel=1e-12)[0]
    return val ** (1 / p)


# --------------------------------------------------------------------------
# JSON grammar


def to_dict(V) -> dict:
    name = TYPE_NAMES[type(V)]
    out: dict = {"dim": V.dim, "type": name}
    if isinstance(V, Constant):
        out["value"] = float(V.value)
    elif isinstance(V, RadialPower):
        out.update(coeff=float(V.coeff), exponent=float(V.exponent))
        if V.radius < INF:
            out["radius"] = float(V.radius)
        if V.inner_radius > 0:
            out["inner_radius"] = float(V.inner_radius)
    elif isinstance(V, IndicatorBall):
        out.update(coeff=float(V.coeff), radius=float(V.radius))
    elif isinstance(V, SlabCounterexample):
        if V.radius < INF:
            out["radius"] = float(V.radius)
    elif isinstance(V, ShiftedRadialDecay):
        out.update(coeff=float(V.coeff), power=float(V.power))
    elif isinstance(V, Tensor):
        out["factors"] = [to_dict(f) for f in V.factors]
    elif isinstance(V, WeightedSum):
        out["terms"] = [{"weight": float(w), "spec": to_dict(t)} for w, t in V.terms]
    elif isinstance(V, Dilate):
        out.update(s=float(V.s), inner=to_dict(V.inner))
    elif isinstance(V, PositivePart):
        out["inner"] = to_dict(V.inner)
    return out


def dumps(V) -> str:
    return json.dumps(to_dict(V), sort_keys=True)


_FIELDS = {
    "constant": ({"value"}, set()),
    "radial_power": ({"coeff", "exponent"}, {"radius", "inner_radius"}),
    "indicator_ball": ({"coeff", "radius"}, set()),
    "slab_counterexample": (set(), {"radius"}),
    "shifted_radial_decay": ({"coeff", "power"}, set()),
    "tensor": ({"factors"}, set()),
    "weighted_sum": ({"terms"}, set()),
    "dilate": ({"s", "inner"}, set()),
    "positive_part": ({"inner"}, set()),
}


def _num(obj, key, path, positive=False, nonneg=False):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(f"{key} must be a number", f"{path}/{key}")
    v = float(v)
    if not math.isfinite(v):
        raise SpecError(f"{key} must be finite", f"{path}/{key}")
    if positive and v <= 0:
        raise SpecError(f"{key} must be positive", f"{path}/{key}")
    if nonneg and v < 0:
        raise SpecError(f"{key} must be nonnegative", f"{path}/{key}")
    return v


def from_dict(obj, path: str = ""):
    if not isinstance(obj, dict):
        raise SpecError("expected an object", path)
    kind = obj.get("type")
    if kind not in _FIELDS:
        raise SpecError(f"unknown node type {kind!r}", f"{path}/type")
    if "dim" not in obj:
        raise SpecError("missing dim", f"{path}/dim")
    dim = obj["dim"]
    try:
        _check_dim(dim)
    except SpecError as e:
        raise SpecError(str(e).split(": ", 1)[1], f"{path}/dim") from None
    required, optional = _FIELDS[kind]
    keys = set(obj) - {"dim", "type"}
    for k in required - keys:
        raise SpecError(f"missing field {k!r}", f"{path}/{k}")
    for k in keys - required - optional:
        raise SpecError(f"unknown field {k!r}", f"{path}/{k}")

    if kind == "constant":
        return Constant(dim, _num(obj, "value", path))
    if kind == "radial_power":
        radius = _num(obj, "radius", path, positive=True) if "radius" in obj else INF
        inner = _num(obj, "inner_radius", path, nonneg=True) if "inner_radius" in obj else 0.0
        if inner >= radius:
            raise SpecError("inner_radius must be below radius", f"{path}/inner_radius")
        return RadialPower(dim, _num(obj, "coeff", path), _num(obj, "exponent", path, nonneg=True),
                           radius, inner)
    if kind == "indicator_ball":
        return IndicatorBall(dim, _num(obj, "coeff", path), _num(obj, "radius", path, positive=True))
    if kind == "slab_counterexample":
        if dim < 4:
            raise SpecError("the slab counterexample needs dim >= 4", f"{path}/dim")
        radius = _num(obj, "radius", path, positive=True) if "radius" in obj else INF
        return SlabCounterexample(dim, radius)
    if kind == "shifted_radial_decay":
        return ShiftedRadialDecay(dim, _num(obj, "coeff", path), _num(obj, "power", path, nonneg=True))
    if kind == "tensor":
        items = obj["factors"]
        if not isinstance(items, list) or not items:
            raise SpecError("factors must be a nonempty list", f"{path}/factors")
        factors = tuple(from_dict(f, f"{path}/factors/{i}") for i, f in enumerate(items))
        if sum(f.dim for f in factors) != dim:
            raise SpecError(
                f"factor dims {[f.dim for f in factors]} do not sum to {dim}", f"{path}/factors")
        return Tensor(dim, factors)
    if kind == "weighted_sum":
        items = obj["terms"]
        if not isinstance(items, list):
            raise SpecError("terms must be a list", f"{path}/terms")
        terms = []
        for i, item in enumerate(items):
            tp = f"{path}/terms/{i}"
            if not isinstance(item, dict) or set(item) != {"weight", "spec"}:
                raise SpecError("a term is {\"weight\": w, \"spec\": {...}}", tp)
            t = from_dict(item["spec"], f"{tp}/spec")
            if t.dim != dim:
                raise SpecError(f"term dim {t.dim} differs from {dim}", f"{tp}/spec/dim")
            terms.append((_num(item, "weight", tp), t))
        return WeightedSum(dim, tuple(terms))
    if kind == "dilate":
        inner = from_dict(obj["inner"], f"{path}/inner")
        if inner.dim != dim:
            raise SpecError(f"inner dim {inner.dim} differs from {dim}", f"{path}/inner/dim")
        return Dilate(dim, _num(obj, "s", path, positive=True), inner)
    inner = from_dict(obj["inner"], f"{path}/inner")
    if inner.dim != dim:
        raise SpecError(f"inner dim {inner.dim} differs from {dim}", f"{path}/inner/dim")
    return PositivePart(dim, inner)


def parse_potential(text: str):
    """Parse the JSON grammar into a spec."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError(f"invalid JSON: {e}") from None
    return from_dict(obj)


# --------------------------------------------------------------------------
# named examples


def example_5_1(p: float, d: int = 3):
    """-|x1|^(-1/p) 1{|x1|<1} 1{|x2|<1} on R x R^(d-1)."""
    if not 1 < p < INF:
        raise ValueError("example_5_1 needs 1 < p < inf")
    if d < 3:
        raise ValueError("example_5_1 needs d >= 3")
    return Tensor(d, (RadialPower(1, -1.0, 1.0 / p, 1.0), IndicatorBall(d - 1, 1.0, 1.0)))


def example_5_2_term(n: int, d: int = 3):
    """V_n = |x1|^(-1+1/n) 1{|x1|<1} 1{|x2|<1}."""
    return Tensor(d, (RadialPower(1, 1.0, 1.0 - 1.0 / n, 1.0), IndicatorBall(d - 1, 1.0, 1.0)))


def example_5_2(n_max: int, sups: dict, d: int = 3):
    """-sum_{n=2}^{n_max} V_n / (n^2 a_n) with a_n = sup S(V_n) supplied by the caller."""
    if n_max < 2:
        raise ValueError("example_5_2 needs n_max >= 2")
    terms = []
    for n in range(2, n_max + 1):
        a_n = float(sups[n] if n in sups else sups[str(n)])
        if not a_n > 0:
            raise ValueError(f"a_{n} must be positive")
        terms.append((-1.0 / (n * n * a_n), example_5_2_term(n, d)))
    return WeightedSum(d, tuple(terms))


def example_5_3(d: int = 4):
    """-1 / (|x2| + 1)^3 with x2 the last three coordinates."""
    if d < 3:
        raise ValueError("example_5_3 needs d >= 3")
    decay = ShiftedRadialDecay(3, 1.0, 3.0)
    if d == 3:
        return ShiftedRadialDecay(3, -1.0, 3.0)
    return Tensor(d, (Constant(d - 3, -1.0), decay))


def example_5_4_factor(eps: float, cutoff: float = 0.0):
    """-(1-eps)/2 |x|^(-1-eps) on |x| < 1 in R^3, optionally zero on |x| < cutoff."""
    if not 0 <= eps < 1:
        raise ValueError("example_5_4 needs 0 <= eps < 1")
    return RadialPower(3, -(1 - eps) / 2, 1 + eps, 1.0, cutoff)


def example_5_4(eps: float, cutoff: float = 0.0):
    f = example_5_4_factor(eps, cutoff)
    return Tensor(6, (f, f))


def counterexample_slab(d: int = 4):
    if d < 4:
        raise ValueError("the slab counterexample needs d >= 4")
    return SlabCounterexample(d)


def counterexample_compact(n_max: int, radii: dict, d: int = 4):
    """sum_{n=1}^{n_max} 2^-n d_{r_n^2}(V 1_{B(0, r_n)}) for the slab V, support in B(0, 1)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    terms = []
    for n in range(1, n_max + 1):
        r_n = float(radii[n] if n in radii else radii[str(n)])
        terms.append((2.0 ** -n, Dilate(d, r_n * r_n, SlabCounterexample(d, r_n))))
    return WeightedSum(d, tuple(terms))


def load_series_constants(path) -> dict:
    """Read a constants file {"kind": ..., "values": {n: value}, "seed": ..., "config": ...}."""
    with open(path) as fh:
        doc = json.load(fh)
    if "values" not in doc:
        raise SpecError("missing values", "/values")
    return {int(k): float(v) for k, v in doc["values"].items()}


def build_example(name: str, **params):
    builders = {
        "example_5_1": example_5_1,
        "example_5_2": example_5_2,
        "example_5_3": example_5_3,
        "example_5_4": example_5_4,
        "example_5_4_factor": example_5_4_factor,
        "counterexample_slab": counterexample_slab,
        "counterexample_compact": counterexample_compact,
    }
    if name not in builders:
        raise ValueError(f"unknown example {name!r}; choose from {sorted(builders)}")
    return builders[name](**params)
