"""Quadrature evaluation of the functionals of a potential.

All time integrals reduce to Gaussian expectations of |V| (see `gaussexp`);
kernel-weighted space integrals (K, the Newtonian potential of radial and slab
potentials) use nested adaptive quadrature in coordinates adapted to the spec.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from . import gaussexp
from . import potentials as P
from .kernels import as_point, newtonian_constant, sphere_area

INF = math.inf


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000
    tail_sigma: float = 8.0
    singularity_split: bool = True

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("rel_tol and abs_tol must be positive")
        if not self.tail_sigma >= 4:
            raise ValueError("tail_sigma must be >= 4")
        if int(self.max_subdivisions) < 1:
            raise ValueError("max_subdivisions must be positive")

    def to_dict(self) -> dict:
        return {"rel_tol": self.rel_tol, "abs_tol": self.abs_tol,
                "max_subdivisions": self.max_subdivisions, "tail_sigma": self.tail_sigma,
                "singularity_split": self.singularity_split}

    @classmethod
    def from_dict(cls, obj: dict) -> "QuadratureConfig":
        unknown = set(obj) - set(cls().to_dict())
        if unknown:
            raise ValueError(f"unknown quadrature keys {sorted(unknown)}")
        return cls(**obj)


DEFAULT = QuadratureConfig()


@dataclass
class FunctionalResult:
    value: float
    error_estimate: float
    method: str  # quadrature | tensor_factorized | monte_carlo | closed_form
    diagnostics: dict = field(default_factory=dict)
    infinite: bool = False

    def __post_init__(self):
        self.error_estimate = abs(float(self.error_estimate))
        self.value = float(self.value)

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", True))

    def to_dict(self) -> dict:
        return {"value": self.value, "error_estimate": self.error_estimate, "method": self.method,
                "infinite": self.infinite, "diagnostics": dict(self.diagnostics)}


class _Tally:
    """Accumulates quadrature diagnostics across nested calls."""

    def __init__(self):
        self.subdivisions = 0
        self.converged = True
        self.inner_rel = 0.0
        self.monte_carlo = False

    def quad(self, f, a, b, cfg: QuadratureConfig, points=None, rel=None):
        rel = cfg.rel_tol if rel is None else rel
        kwargs = dict(epsabs=cfg.abs_tol, epsrel=rel, limit=int(cfg.max_subdivisions), full_output=1)
        if points is not None and math.isfinite(a) and math.isfinite(b):
            pts = sorted({float(p) for p in points if a < p < b})
            if pts:
                kwargs["points"] = pts
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            out = integrate.quad(f, a, b, **kwargs)
        val, err, info = out[0], out[1], out[2]
        self.subdivisions += int(info.get("last", 0))
        if len(out) > 3 and "roundoff" not in str(out[3]).lower():
            # non-convergence flag from QUADPACK; roundoff alone is benign here
            self.converged = self.converged and err <= max(10 * rel * abs(val), 10 * cfg.abs_tol)
        return val, err

    def expect(self, V, m, sigma, cfg):
        e = gaussexp.expectation(V, m, sigma, cfg.tail_sigma)
        if e.value > 0:
            self.inner_rel = max(self.inner_rel, e.error / e.value)
        self.monte_carlo = self.monte_carlo or e.monte_carlo
        return e.value

    def result(self, V, value, err, truncation=INF, method=None):
        if method is None:
            if self.monte_carlo:
                method = "monte_carlo"
            elif isinstance(V, P.Tensor):
                method = "tensor_factorized"
            else:
                method = "quadrature"
        err = err + self.inner_rel * abs(value)
        return FunctionalResult(value, err, method,
                                {"subdivisions": self.subdivisions, "truncation_radius": truncation,
                                 "converged": self.converged})


def _check_point(V, x):
    return as_point(x, V.dim)


def _segment_hints(V, x, y):
    """Fractions s/t at which the segment x -> y passes closest to a singular block."""
    out = []
    for sl in P.singular_slices(V):
        a, b = x[sl], y[sl]
        d = b - a
        dd = float(d @ d)
        if dd > 0:
            out.append(min(max(-float(a @ d) / dd, 0.0), 1.0))
    return out


# --------------------------------------------------------------------------
# bridge functional


def bridge_semigroup(V, s: float, t: float, x, y, cfg: QuadratureConfig = DEFAULT) -> float:
    """(T_s^{t,y} |V|)(x): the bridge average of |V| at time s."""
    x, y = _check_point(V, x), _check_point(V, y)
    if not 0 < s < t:
        raise ValueError("bridge time s must lie in (0, t)")
    mean = x + (s / t) * (y - x)
    return gaussexp.expectation(V, mean, math.sqrt(2 * s * (t - s) / t), cfg.tail_sigma).value


def S_bridge(V, t: float, x, y, cfg: QuadratureConfig = DEFAULT) -> FunctionalResult:
    """S(V,t,x,y) = int_0^t int bridge(s,t,x,y,z) |V(z)| dz ds."""
    if not t > 0:
        raise ValueError("t must be positive")
    x, y = _check_point(V, x), _check_point(V, y)
    tally = _Tally()
    if P.sign_of(V) == 0:
        return tally.result(V, 0.0, 0.0, method="closed_form")
    if isinstance(V, P.Constant):
        return tally.result(V, abs(V.value) * t, 0.0, method="closed_form")
    diff = y - x

    def E(a, start, sign):
        # bridge time a from one end, offset kept exact to avoid t - (t - a) rounding to 0
        var = 2 * a * (t - a) / t
        return tally.expect(V, start + sign * (a / t) * diff, math.sqrt(max(var, 0.0)), cfg)

    # s = (t/2) u^2 from either end
    def f(u):
        if u == 0:
            return 0.0
        a = 0.5 * t * u * u
        return t * u * (E(a, x, 1.0) + E(a, y, -1.0))

    points = []
    if cfg.singularity_split:
        for frac in _segment_hints(V, x, y):
            frac = min(frac, 1 - frac)
            points.append(math.sqrt(2 * frac))
    val, err = tally.quad(f, 0.0, 1.0, cfg, points)
    return tally.result(V, val, err)


# --------------------------------------------------------------------------
# the N functional


def _n_piece(V, t, x, y, cfg, tally, direct_second=False):
    """First piece (4pi)^{d/2} int_0^{t/2} E_{N(y - (tau/t)(y-x), 2 tau)} |V| dtau.

    With `direct_second` the second piece is evaluated from its own definition:
    (4pi)^{d/2} int_{t/2}^t E_{N(y - (tau/t)(y-x), 2(t - tau))} |V| dtau.
    """
    d = V.dim
    diff = y - x

    def f(u):
        if u == 0:
            return 0.0
        a = 0.5 * t * u * u
        if direct_second:
            tau = t - a
            return t * u * tally.expect(V, y - (tau / t) * diff, math.sqrt(2 * (t - tau)), cfg)
        return t * u * tally.expect(V, y - (a / t) * diff, math.sqrt(2 * a), cfg)

    val, err = tally.quad(f, 0.0, 1.0, cfg)
    c = (4 * math.pi) ** (d / 2)
    return c * val, c * err


def N_pieces(V, t: float, x, y, cfg: QuadratureConfig = DEFAULT) -> tuple[float, float]:
    """The two pieces of N(V,t,x,y), the second by the x <-> y swap identity."""
    x, y = _check_point(V, x), _check_point(V, y)
    tally = _Tally()
    return _n_piece(V, t, x, y, cfg, tally)[0], _n_piece(V, t, y, x, cfg, tally)[0]


def N_functional(V, t: float, x, y, cfg: QuadratureConfig = DEFAULT,
                 use_symmetry: bool = True) -> FunctionalResult:
    """N(V,t,x,y). With use_symmetry=False both pieces follow their definitions."""
    if not t > 0:
        raise ValueError("t must be positive")
    x, y = _check_point(V, x), _check_point(V, y)
    tally = _Tally()
    v1, e1 = _n_piece(V, t, x, y, cfg, tally)
    if use_symmetry:
        v2, e2 = _n_piece(V, t, y, x, cfg, tally)
    else:
        v2, e2 = _n_piece(V, t, x, y, cfg, tally, direct_second=True)
    return tally.result(V, v1 + v2, e1 + e2)


# --------------------------------------------------------------------------
# heat and Newtonian potentials


def heat_potential(V, T: float, x, cfg: QuadratureConfig = DEFAULT) -> FunctionalResult:
    """int_0^T int g(s,x,z) |V(z)| dz ds; T = inf gives the Newtonian potential."""
    x = _check_point(V, x)
    if not T > 0:
        raise ValueError("T must be positive")
    if T == INF and V.dim < 3:
        raise ValueError("the heat potential at T = inf needs d >= 3")
    tally = _Tally()
    if P.sign_of(V) == 0:
        return tally.result(V, 0.0, 0.0, method="closed_form")
    if isinstance(V, P.Constant):
        if T == INF:
            raise ValueError("a nonzero constant has an infinite Newtonian potential")
        return tally.result(V, abs(V.value) * T, 0.0, method="closed_form")

    def E(s):
        return tally.expect(V, x, math.sqrt(2 * s), cfg)

    head = min(T, 1.0)
    val, err = tally.quad(lambda u: 2 * head * u * E(head * u * u) if u > 0 else 0.0, 0.0, 1.0, cfg)
    if T > 1:
        v2, e2 = tally.quad(E, 1.0, T, cfg)
        val, err = val + v2, err + e2
    return tally.result(V, val, err)


def _radial_newtonian(prof: P.RadialProfile, d: int, rx: float, cfg, tally, upper=INF):
    """int |f|(rho) rho^{d-1} max(rho, |x|)^{2-d} d rho (shell theorem)."""
    upper = min(upper, prof.support)
    f = lambda r: prof.absolute(r) * r ** (d - 1) * max(r, rx) ** (2 - d) if r > 0 else 0.0
    pts = sorted({0.0, *(b for b in prof.breaks if b < upper), *([rx] if 0 < rx < upper else [])})
    val = err = 0.0
    for a, b in zip(pts, pts[1:] + [upper]):
        if b <= a:
            continue
        v, e = tally.quad(f, a, b, cfg)
        val, err = val + v, err + e
    return val, err


def _slab_axis(V, x, y) -> bool:
    return isinstance(V, P.SlabCounterexample) and not np.any(x[1:]) and not np.any(y[1:])


def _slab_newtonian(V, x1, cfg, tally):
    """C_d int (1/z1) int_{|z'| <= sqrt z1} |z - x|^{2-d} dz' dz1 for x on the axis."""
    d = V.dim
    R = V.radius
    area = sphere_area(d - 1)

    def rho_max(z1):
        r2 = z1 if R == INF else min(z1, R * R - z1 * z1)
        return math.sqrt(max(r2, 0.0))

    def inner(z1):
        a = abs(z1 - x1)
        rho = rho_max(z1)
        if d == 4:
            # int_0^rho r^2/(a^2 + r^2) dr
            if a == 0:
                return area * rho
            q = rho / a
            if q < 1e-2:
                return area * a * q ** 3 * (1 / 3 - q * q / 5 + q ** 4 / 7)
            return area * a * (q - math.atan(q))
        g = lambda r: r ** (d - 2) * (a * a + r * r) ** ((2 - d) / 2)
        return area * tally.quad(g, 0.0, rho, cfg, rel=cfg.rel_tol * 1e-2)[0]

    # z1 = e^v; dz1 / z1 = dv
    lo = math.log(4.0)
    hi = math.log(R) if R < INF else INF
    pts = [math.log(x1)] if x1 > 4 else []
    if hi < INF:
        val, err = tally.quad(lambda v: inner(math.exp(v)), lo, hi, cfg, pts)
    else:
        # the integrand decays like exp(-(d-3) v / 2); 100 units of v is far past 1e-16
        split = max(pts + [lo]) + 2.0
        v1, e1 = tally.quad(lambda v: inner(math.exp(v)), lo, split, cfg, pts)
        v2, e2 = tally.quad(lambda v: inner(math.exp(v)), split, split + 200.0 / (d - 3), cfg)
        val, err = v1 + v2, e1 + e2
    c = newtonian_constant(d)
    return c * val, c * err


def newtonian_potential(V, x, cfg: QuadratureConfig = DEFAULT) -> FunctionalResult:
    """Delta^{-1}|V|(x) = int C_d |z - x|^{2-d} |V(z)| dz."""
    x = _check_point(V, x)
    d = V.dim
    if d < 3:
        raise ValueError("the Newtonian potential needs d >= 3")
    tally = _Tally()
    if P.sign_of(V) == 0:
        return tally.result(V, 0.0, 0.0, method="closed_form")
    if P.is_radial(V) and not isinstance(V, P.Constant):
        val, err = _radial_newtonian(P.radial_profile(V), d, float(np.linalg.norm(x)), cfg, tally)
        c = newtonian_constant(d) * sphere_area(d)
        return tally.result(V, c * val, c * err)
    if _slab_axis(V, x, x):
        val, err = _slab_newtonian(V, float(x[0]), cfg, tally)
        return tally.result(V, val, err)
    return heat_potential(V, INF, x, cfg)


# --------------------------------------------------------------------------
# the K functional


def _k_scalar(u2: float, uy: float, ny: float, d: int) -> float:
    """K(u, y) from |u|^2, u.y and |y|."""
    nu = math.sqrt(u2)
    if nu == 0:
        return INF
    return math.exp(-0.5 * (ny * nu - uy) + (2 - d) * math.log(nu) + 0.5 * (d - 3) * math.log1p(nu * ny))


@dataclass(frozen=True)
class _Frame:
    """x = a yhat + b ehat, with yhat along y (or x when y = 0)."""

    a: float
    b: float
    ny: float


def _frame(x: np.ndarray, y: np.ndarray) -> _Frame:
    ny = float(np.linalg.norm(y))
    nx = float(np.linalg.norm(x))
    if ny > 0:
        a = float(x @ y) / ny
    else:
        a = nx
    b = math.sqrt(max(nx * nx - a * a, 0.0))
    if b <= 1e-13 * (nx + 1):
        b = 0.0
    return _Frame(a, b, ny)


_PHI_EDGES = np.concatenate([[0.0], math.pi * 2.0 ** -np.arange(14, -1, -1.0)])


def _sphere_average_K(rho: float, fr: _Frame, d: int, cfg, tally) -> float:
    """int over |omega| = 1 of K(rho omega - x, y) d omega."""
    a, b, ny = fr.a, fr.b, fr.ny
    rel = max(cfg.rel_tol * 1e-2, 1e-13)
    if b == 0:
        def g(theta):
            c, s = math.cos(theta), math.sin(theta)
            u2 = rho * rho + a * a - 2 * rho * a * c
            k = _k_scalar(u2, ny * (rho * c - a), ny, d)
            return k * s ** (d - 2) if math.isfinite(k) else 0.0

        val, _ = tally.quad(g, 0.0, math.pi, cfg, rel=rel)
        return sphere_area(d - 1) * val

    # general position: theta from yhat, phi the azimuth measured from ehat
    xg, wg = gaussexp._legendre(12)
    A, B = _PHI_EDGES[:-1, None], _PHI_EDGES[1:, None]
    phis = ((A + B) / 2 + (B - A) / 2 * xg).ravel()
    wphi = ((B - A) / 2 * wg).ravel() * np.sin(phis) ** (d - 3)
    cphi = np.cos(phis)
    x2 = a * a + b * b

    def g(theta):
        c, s = math.cos(theta), math.sin(theta)
        u2 = rho * rho + x2 - 2 * rho * (a * c + b * s * cphi)
        nu = np.sqrt(np.maximum(u2, 1e-300))
        uy = ny * (rho * c - a)
        k = np.exp(-0.5 * (ny * nu - uy) + (2 - d) * np.log(nu) + 0.5 * (d - 3) * np.log1p(nu * ny))
        return float(np.dot(wphi, k)) * s ** (d - 2)

    theta_x = math.atan2(b, a)
    val, _ = tally.quad(g, 0.0, math.pi, cfg, [theta_x], rel=rel)
    return sphere_area(d - 2) * val


def _k_radial(V, x, y, R, cfg, tally):
    d = V.dim
    prof = P.radial_profile(V)
    fr = _frame(x, y)
    upper = min(prof.support, R)
    nx = float(np.linalg.norm(x))

    def f(rho):
        if rho <= 0:
            return 0.0
        v = prof.absolute(rho)
        if v == 0:
            return 0.0
        return float(v) * rho ** (d - 1) * _sphere_average_K(rho, fr, d, cfg, tally)

    pts = sorted({0.0, *(b for b in prof.breaks if 0 < b < upper), *([nx] if 0 < nx < upper else [])})
    pts = [p for p in pts if p >= prof.inner_support]
    if not pts or pts[0] > prof.inner_support:
        pts = [prof.inner_support] + pts
    val = err = 0.0
    for lo, hi in zip(pts, pts[1:] + [upper]):
        if hi <= lo:
            continue
        v, e = tally.quad(f, lo, hi, cfg)
        val, err = val + v, err + e
    return val, err


def _k_slab(V, x1, y1, R, cfg, tally):
    d = V.dim
    R = min(R, V.radius)
    if R == INF and y1 != 0:
        raise ValueError("K of the slab potential diverges; pass a finite truncation_radius")
    area = sphere_area(d - 1)
    ny = abs(y1)

    def inner(z1):
        u1 = z1 - x1
        r2 = z1 if R == INF else min(z1, R * R - z1 * z1)
        rho = math.sqrt(max(r2, 0.0))
        if rho == 0:
            return 0.0
        g = lambda r: r ** (d - 2) * _k_scalar(u1 * u1 + r * r, y1 * u1, ny, d) if (u1 or r) else 0.0
        return area * tally.quad(g, 0.0, rho, cfg, rel=max(cfg.rel_tol * 1e-2, 1e-13))[0]

    lo = math.log(4.0)
    pts = [math.log(x1)] if x1 > 4 else []
    if R < INF:
        hi = math.log(R)
        if hi <= lo:
            return 0.0, 0.0
        # the section radius kinks where z1^2 + z1 = R^2
        pts.append(math.log((-1 + math.sqrt(1 + 4 * R * R)) / 2))
        return tally.quad(lambda v: inner(math.exp(v)), lo, hi, cfg, pts)
    split = max(pts + [lo]) + 2.0
    v1, e1 = tally.quad(lambda v: inner(math.exp(v)), lo, split, cfg, pts)
    v2, e2 = tally.quad(lambda v: inner(math.exp(v)), split, split + 200.0 / (d - 3), cfg)
    return v1 + v2, e1 + e2


_K_DIRS = 2 ** 12
_K_REPS = 4


def _k_generic(V, x, y, R, cfg):
    """Spherical coordinates about x; directions from scrambled Sobol points."""
    from scipy.stats import norm, qmc

    d = V.dim
    rmax = min(R, P.support_radius(V) + float(np.linalg.norm(x)))
    if rmax == INF:
        raise ValueError("this potential needs a finite truncation_radius for K")
    ny = float(np.linalg.norm(y))
    edges = np.concatenate([[0.0], rmax * np.geomspace(1e-6, 1.0, 40)])
    xg, wg = gaussexp._legendre(8)
    A, B = edges[:-1, None], edges[1:, None]
    r = ((A + B) / 2 + (B - A) / 2 * xg).ravel()
    wr = ((B - A) / 2 * wg).ravel()
    reps = []
    for rep in range(_K_REPS):
        g = norm.ppf(qmc.Sobol(d, scramble=True, seed=4321 + rep).random_base2(int(math.log2(_K_DIRS))))
        omega = g / np.linalg.norm(g, axis=1, keepdims=True)
        total = 0.0
        for ri, wi in zip(r, wr):
            u = ri * omega
            vals = np.abs(P.values(V, x + u))
            vals[~np.isfinite(vals)] = 0.0
            kern = np.exp(-0.5 * (ny * ri - u @ y) + 0.5 * (d - 3) * math.log1p(ri * ny)) * ri ** (2 - d)
            total += wi * ri ** (d - 1) * float(np.mean(vals * kern))
        reps.append(total * sphere_area(d))
    reps = np.asarray(reps)
    return float(reps.mean()), float(reps.std(ddof=1) / math.sqrt(len(reps))), rmax


def K_functional(V, x, y, cfg: QuadratureConfig = DEFAULT,
                 truncation_radius: float = INF) -> FunctionalResult:
    """int_{|z| <= R} |V(z)| K(z - x, y) dz."""
    x, y = _check_point(V, x), _check_point(V, y)
    d = V.dim
    if d < 3:
        raise ValueError("K needs d >= 3")
    if not truncation_radius > 0:
        raise ValueError("truncation_radius must be positive")
    tally = _Tally()
    R = float(truncation_radius)
    if P.sign_of(V) == 0:
        return tally.result(V, 0.0, 0.0, R, method="closed_form")
    if P.is_radial(V) and not isinstance(V, P.Constant):
        val, err = _k_radial(V, x, y, R, cfg, tally)
        return tally.result(V, val, err, R)
    if _slab_axis(V, x, y):
        val, err = _k_slab(V, float(x[0]), float(y[0]), R, cfg, tally)
        return tally.result(V, val, err, min(R, V.radius))
    val, err, rmax = _k_generic(V, x, y, R, cfg)
    return FunctionalResult(val, err, "monte_carlo",
                            {"subdivisions": 0, "truncation_radius": rmax, "converged": True})


# --------------------------------------------------------------------------
# e*


def e_star_integral(V, lam: float, y, w, cfg: QuadratureConfig = DEFAULT,
                    tau_max: float = INF) -> FunctionalResult:
    """(4pi)^{-d/2} int J(z - y, w, lam) |V(z)| dz, as a drifted heat potential.

    Equals int_0^inf e^{-lam tau} E_{N(y + tau w, 2 tau)} |V| dtau.
    """
    y, w = _check_point(V, y), _check_point(V, w)
    if V.dim < 3:
        raise ValueError("e* needs d >= 3")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    tally = _Tally()
    if P.sign_of(V) == 0:
        return tally.result(V, 0.0, 0.0, tau_max, method="closed_form")
    if isinstance(V, P.Constant) and lam > 0 and tau_max == INF:
        return tally.result(V, abs(V.value) / lam, 0.0, method="closed_form")

    def E(tau):
        return math.exp(-lam * tau) * tally.expect(V, y + tau * w, math.sqrt(2 * tau), cfg)

    head = min(tau_max, 1.0)
    val, err = tally.quad(lambda u: 2 * head * u * E(head * u * u) if u > 0 else 0.0, 0.0, 1.0, cfg)
    # tau > 1 in v = ln tau, panels spanning a factor of 16 each
    v_end = math.log(min(tau_max, _TAU_FAR))
    edges = list(np.arange(0.0, v_end, 4 * math.log(2))) + [v_end]
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            v2, e2 = tally.quad(lambda v: math.exp(v) * E(math.exp(v)), a, b, cfg)
            val, err = val + v2, err + e2
    if tau_max > _TAU_FAR:
        # tau = T / u^2 turns the tau^{-d/2} tail into a bounded integrand
        T = _TAU_FAR
        u0 = math.sqrt(T / tau_max)
        v2, e2 = tally.quad(lambda u: 2 * T * u ** -3 * E(T / (u * u)) if u > 0 else 0.0, u0, 1.0, cfg)
        val, err = val + v2, err + e2
    return tally.result(V, val, err, tau_max)


_TAU_FAR = 2.0 ** 40


def e_star(V, lam: float, cfg: QuadratureConfig = DEFAULT, domain=None, search=None):
    """e*(V, lam): the supremum over (y, w) of `e_star_integral`, via supsearch."""
    from . import supsearch

    if V.dim < 3:
        raise ValueError("e* needs d >= 3")
    return supsearch.e_star_search(V, lam, cfg, domain, search)


# --------------------------------------------------------------------------
# constants


def C_d(d: int) -> float:
    return newtonian_constant(d)


def C_dp(d: int, p: float) -> float:
    """Holder constant of the heat kernel: ||g(t, x, .)||_{p'} = C(d,p) t^{-d/(2p)}."""
    p = float(p)
    if not p >= 1:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    if p == 1:
        return (4 * math.pi) ** (-d / 2)
    if p == INF:
        return 1.0
    q = 1 - 1 / p
    return (4 * math.pi) ** (-d / (2 * p)) * q ** (q * d / 2)


def bridge_sup_bound(d: int, p: float, s: float, t: float, norm: float) -> float:
    """C(d,p) [(t-s)s/t]^{-d/(2p)} ||f||_p, the sup bound on bridge averages."""
    expo = 0.0 if p == INF else d / (2 * p)
    return C_dp(d, p) * ((t - s) * s / t) ** (-expo) * norm


def _kappa_inner(r: float, d: int, q: float, cfg, tally) -> float:
    """int_0^pi exp(-q r (1 - cos theta)/2) sin^{d-2} theta d theta, via x = a(1 - cos)."""
    a = q * r / 2
    e = (d - 3) / 2
    g = lambda x: math.exp(-x) * ((x / a) * (2 - x / a)) ** e / a
    hi = min(2 * a, 80.0)
    return tally.quad(g, 0.0, hi, cfg, rel=1e-13)[0]


def _kappa_inner_bessel(r: float, d: int, q: float) -> float:
    a = q * r / 2
    nu = (d - 2) / 2
    if a > 1e8:
        ive = (1 - (4 * nu * nu - 1) / (8 * a)) / math.sqrt(2 * math.pi * a)
    else:
        ive = float(special.ive(nu, a))
    return math.sqrt(math.pi) * math.gamma((d - 1) / 2) * (2 / a) ** nu * ive


def kappa(d: int, cfg: QuadratureConfig | None = None) -> tuple[float, float]:
    """(kappa_d, error estimate) by a 2-d radial/angular reduction.

    kappa_d = ( int_{|w|>1} (e^{-(|w|-w_1)/2} |w|^{-(d-1)/2})^{d/(d-2)} dw )^{(d-2)/d}.
    The error estimate combines the quadrature errors with the gap to a
    Bessel-function evaluation of the angular integral.
    """
    if d < 4:
        raise ValueError("kappa_d is defined for d >= 4")
    cfg = cfg or QuadratureConfig(rel_tol=1e-12, abs_tol=1e-300)
    q = d / (d - 2)
    tally = _Tally()
    area = sphere_area(d - 1)
    expo = d - q * (d - 1) / 2  # power of r after dr = r dv
    # the angular integral decays like r^{-(d-1)/2}; cut where the tail is below 1e-17
    decay = q * (d - 1) / 2 - (d + 1) / 2
    v_max = 40.0 / decay

    def outer(v, inner):
        r = math.exp(v)
        return area * math.exp(expo * v) * inner(r)

    parts = []
    for inner in (lambda r: _kappa_inner(r, d, q, cfg, tally), lambda r: _kappa_inner_bessel(r, d, q)):
        v1, e1 = tally.quad(lambda v: outer(v, inner), 0.0, 10.0, cfg)
        v2, e2 = tally.quad(lambda v: outer(v, inner), 10.0, v_max, cfg)
        parts.append((v1 + v2, e1 + e2))
    (I, err), (I_b, _) = parts
    value = I ** (1 / q)
    rel = (err + abs(I - I_b)) / I / q
    return value, rel * value


@dataclass
class ConstantsTable:
    d: int
    C_d: float | None
    C_dp: dict
    kappa_d: float | None = None
    kappa_error: float | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"d": self.d, "C_d": self.C_d,
                "C_dp": {_pkey(p): v for p, v in self.C_dp.items()},
                "kappa_d": self.kappa_d, "kappa_error": self.kappa_error, "notes": list(self.notes)}


def _pkey(p: float) -> str:
    return "inf" if p == INF else repr(float(p))


def parse_p(text) -> float:
    if isinstance(text, str) and text.strip().lower() in ("inf", "infinity", "∞"):
        return INF
    p = float(text)
    if not p >= 1:
        raise ValueError(f"p must lie in [1, inf], got {text}")
    return p


_KAPPA_CFG = {"rel_tol": 1e-12, "reduction": "radial-angular", "angular_check": "bessel_i"}


def constants(d: int, p_list=(1.0, 2.0, INF), cache_path=None) -> ConstantsTable:
    """C_d, C(d,p) for p in p_list and kappa_d (d >= 4), optionally via a JSON cache."""
    if d < 1:
        raise ValueError("d must be positive")
    ps = [parse_p(p) for p in p_list]
    table = ConstantsTable(d, C_d(d) if d >= 3 else None, {p: C_dp(d, p) for p in ps})
    table.notes.append("C(d,p) closed form; C_d = Gamma(d/2-1)/(4 pi^(d/2))")
    if d >= 4:
        cached = _read_kappa_cache(cache_path, d)
        if cached is None:
            table.kappa_d, table.kappa_error = kappa(d)
            _write_kappa_cache(cache_path, d, table.kappa_d, table.kappa_error)
            table.notes.append("kappa_d computed by nested quadrature")
        else:
            table.kappa_d, table.kappa_error = cached
            table.notes.append("kappa_d read from cache")
    return table


def _read_kappa_cache(path, d):
    if path is None:
        return None
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        return None
    entry = doc.get("kappa", {}).get(str(d))
    if not entry or entry.get("config") != _KAPPA_CFG:
        return None
    return float(entry["value"]), float(entry["error"])


def _write_kappa_cache(path, d, value, error):
    if path is None:
        return
    from .serial import atomic_write

    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        doc = {}
    doc.setdefault("kappa", {})[str(d)] = {"value": value, "error": error, "config": _KAPPA_CFG}
    atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# explicit bound constants


def bound_exponent(kind: str, params: dict) -> float:
    """Power of t in the bound S <= c t^e."""
    if kind == "zhang_a":
        p = float(params["p"])
        return 1.0 if p == INF else 1 - params["d"] / (2 * p)
    if kind == "tensor_a":
        r = float(params["r"])
        p2 = float(params["p2"])
        return 1 - params["d1"] / (2 * r) - (0 if p2 == INF else params["d2"] / (2 * p2))
    raise ValueError(f"unknown bound kind {kind!r}")


def theorem_bound(kind: str, params: dict, norms: dict) -> float:
    """Explicit constant c of the single-potential or tensor-product bound.

    zhang_a: params {d, p}, norms {"V": ||V||_p}.
    tensor_a: params {d1, d2, r, p2[, p1]}, norms {"V1": ||V1||_r, "V2": ||V2||_p2}.
    """
    if kind == "zhang_a":
        d, p = int(params["d"]), float(params["p"])
        if not p > d / 2:
            raise ValueError("zhang_a needs p > d/2")
        e = d / (2 * p) if p < INF else 0.0
        return C_dp(d, p) * math.gamma(1 - e) ** 2 / math.gamma(2 - 2 * e) * float(norms["V"])
    if kind == "tensor_a":
        d1, d2 = int(params["d1"]), int(params["d2"])
        r, p2 = float(params["r"]), float(params["p2"])
        if "p1" in params:
            p1 = float(params["p1"])
            if abs(d1 / (2 * p1) + d2 / (2 * p2) - 1) > 1e-12:
                raise ValueError("tensor_a needs d1/(2 p1) + d2/(2 p2) = 1")
            if not r > p1:
                raise ValueError("tensor_a needs r > p1")
        e = 1 - bound_exponent(kind, params)
        if not e < 1:
            raise ValueError("exponent constraint violated: 1 - d1/(2r) - d2/(2p2) must be positive")
        return (C_dp(d1, r) * C_dp(d2, p2) * math.gamma(1 - e) ** 2 / math.gamma(2 - 2 * e)
                * float(norms["V1"]) * float(norms["V2"]))
    raise ValueError(f"unknown bound kind {kind!r}")


def example_5_1_parameters(p: float, p1: float, r: float, d: int = 3) -> dict:
    """Exponents of the tensor bound for the singular slab family on R x R^{d-1}."""
    d1, d2 = 1, d - 1
    p2 = (d2 / 2) * p1 / (p1 - 0.5)
    if not (0.5 < p1 < r <= p):
        raise ValueError("need 1/2 < p1 < r <= p")
    return {"d1": d1, "d2": d2, "p1": p1, "p2": p2, "r": r}


# --------------------------------------------------------------------------
# export


def potential_id(V) -> str:
    return hashlib.sha256(P.dumps(V).encode()).hexdigest()[:12]


CSV_FIELDS = ("functional", "potential_id", "t", "x", "y", "value", "error", "method")


def fmt(v) -> str:
    """Floats with 17 significant digits; vectors comma-joined."""
    if v is None:
        return ""
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(fmt(float(c)) for c in np.ravel(v))
    if isinstance(v, float) or isinstance(v, np.floating):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def csv_text(rows) -> str:
    """rows: dicts with CSV_FIELDS keys."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for row in rows:
        w.writerow([fmt(row.get(k)) for k in CSV_FIELDS])
    return buf.getvalue()
