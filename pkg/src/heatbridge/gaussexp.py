"""Expectations E|V(Z)| for isotropic Gaussian Z ~ N(m, sigma^2 I).

Every functional in this package is a time integral of such expectations
under bridge or heat semigroups, so this is the numerical core.
Routes, by spec node:

* radial nodes: 1-d integral against the noncentral chi density, on fixed
  Gauss-Legendre panels with a Gauss-Jacobi panel absorbing r^-alpha at 0;
* indicator balls: the noncentral chi-square cdf;
* tensors: product of per-factor expectations on the split mean;
* slab: 1-d adaptive quadrature in z1 of a chi-square cdf;
* anything else: Gauss-Hermite product rule (dim <= 3) or scrambled Sobol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special, stats

from . import potentials as P

INF = math.inf


@dataclass(frozen=True)
class Expectation:
    value: float
    error: float
    monte_carlo: bool = False

    def __mul__(self, other: "Expectation") -> "Expectation":
        return Expectation(self.value * other.value,
                           abs(self.value) * other.error + abs(other.value) * self.error
                           + self.error * other.error,
                           self.monte_carlo or other.monte_carlo)

    def scaled(self, c: float) -> "Expectation":
        return Expectation(abs(c) * self.value, abs(c) * self.error, self.monte_carlo)


ZERO = Expectation(0.0, 0.0)


@lru_cache(maxsize=None)
def _legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=None)
def _jacobi(n: int, beta: float):
    # weight (1 + x)^beta on [-1, 1]
    x, w = special.roots_jacobi(n, 0.0, beta)
    return x, w


def _h(nu: float, z: np.ndarray) -> np.ndarray:
    """z^-nu I_nu(z) e^-z with its z -> 0 limit."""
    h0 = 2.0 ** (-nu) / math.gamma(nu + 1)
    small = z < 1e-8
    zs = np.where(small, 1.0, z)
    return np.where(small, h0, zs ** (-nu) * special.ive(nu, zs))


def _chi_weight(rho: np.ndarray, k: int, lam: float) -> np.ndarray:
    """Noncentral chi density without the rho^(k-1) factor."""
    return np.exp(-0.5 * (rho - lam) ** 2) * _h(k / 2 - 1, lam * rho)


def _panels(points, width):
    """Split consecutive breakpoints into panels no wider than `width`."""
    out = []
    for a, b in zip(points[:-1], points[1:]):
        if b <= a:
            continue
        n = max(1, int(math.ceil((b - a) / width)))
        h = (b - a) / n
        out.extend((a + i * h, a + (i + 1) * h if i < n - 1 else b) for i in range(n))
    return out


_ORDERS = (12, 20)


@lru_cache(maxsize=None)
def _rules(beta: float | None):
    """Stacked nodes/weights of both orders on [-1, 1] (Jacobi weight (1+x)^beta if given)."""
    nodes, weights = [], []
    for n in _ORDERS:
        x, w = _legendre(n) if beta is None else _jacobi(n, beta)
        nodes.append(x)
        weights.append(w)
    x = np.concatenate(nodes)
    W = np.zeros((2, x.size))
    W[0, : _ORDERS[0]] = weights[0]
    W[1, _ORDERS[0]:] = weights[1]
    return x, W


def radial_expectation(prof: P.RadialProfile, k: int, m_norm: float, sigma: float,
                       tail_sigma: float = 8.0) -> Expectation:
    """E|f(|Z|)| for Z ~ N(m, sigma^2 I_k), |m| = m_norm."""
    if prof.support == 0:
        return ZERO
    lam = m_norm / sigma
    if prof.alpha0 >= k:
        raise ValueError(f"|V| ~ r^-{prof.alpha0} is not locally integrable in dimension {k}")
    # the window follows the Gaussian bulk, or the support edge nearest to it
    inner = prof.inner_support / sigma
    hi = max(math.sqrt(lam * lam + k), inner) + tail_sigma
    hi = min(hi, prof.support / sigma)
    lo = max(0.0, min(lam, hi) - tail_sigma)
    if hi <= lo:
        return ZERO
    pts = {lo, hi}
    for b in prof.breaks:
        if lo < b / sigma < hi:
            pts.add(b / sigma)
    if lo < lam < hi:
        pts.add(lam)
    # geometric grading away from features far below the panel width
    for b in list(pts):
        c = 2 * b
        while 0 < c < min(hi, 2.0):
            pts.add(c)
            c *= 2
    panels = _panels(sorted(pts), 2.0)

    totals = np.zeros(2)
    if prof.alpha0 > 0 and lo == 0.0:
        a, b = panels.pop(0)
        beta = k - 1 - prof.alpha0
        xj, W = _rules(beta)
        rho = b * (1 + xj) / 2
        g = prof.absolute(sigma * rho) * rho ** prof.alpha0 * _chi_weight(rho, k, lam)
        totals += (b / 2) ** (beta + 1) * (W @ g)
    if panels:
        xg, W = _rules(None)
        A = np.array([p[0] for p in panels])[:, None]
        B = np.array([p[1] for p in panels])[:, None]
        rho = (A + B) / 2 + (B - A) / 2 * xg[None, :]
        g = prof.absolute(sigma * rho) * rho ** (k - 1) * _chi_weight(rho, k, lam)
        totals += W @ np.sum((B - A) / 2 * g, axis=0)
    value = float(totals[1])
    return Expectation(value, abs(value - float(totals[0])) + 1e-15 * abs(value))


def _indicator(coeff: float, radius: float, k: int, m_norm: float, sigma: float) -> Expectation:
    p = float(special.chndtr(radius * radius / (sigma * sigma), k, (m_norm / sigma) ** 2))
    return Expectation(abs(coeff) * p, 1e-14 * abs(coeff) * p)


def _slab(V: P.SlabCounterexample, m: np.ndarray, sigma: float, tail_sigma: float) -> Expectation:
    d = V.dim
    m1 = float(m[0])
    m2 = float(np.sum(m[1:] ** 2))
    R = V.radius
    lo = max(4.0, m1 - tail_sigma * sigma)
    hi = m1 + tail_sigma * sigma
    if R < INF:
        hi = min(hi, R)
    if hi <= lo:
        return ZERO
    s2 = sigma * sigma
    kink = (-1 + math.sqrt(1 + 4 * R * R)) / 2 if R < INF else INF

    def f(z1):
        rho2 = z1 if z1 <= kink else max(R * R - z1 * z1, 0.0)
        cdf = special.chndtr(rho2 / s2, d - 1, m2 / s2)
        return cdf * math.exp(-0.5 * ((z1 - m1) / sigma) ** 2) / (z1 * sigma * math.sqrt(2 * math.pi))

    pts = sorted({p for p in (m1, m2, kink) if lo < p < hi})
    pts = [lo] + pts + [hi]
    val = err = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        v, e = integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-11, limit=200)
        val += v
        err += e
    return Expectation(val, err)


_SOBOL_M = 14  # 2^14 points per scramble
_SOBOL_REPS = 4


def _generic(V, m: np.ndarray, sigma: float) -> Expectation:
    """Fallback for signed, non-radial combinations."""
    d = V.dim
    if d <= 3:
        results = []
        for n in (32, 48):
            x, w = np.polynomial.hermite_e.hermegauss(n)
            w = w / math.sqrt(2 * math.pi)
            grids = np.meshgrid(*([x] * d), indexing="ij")
            wts = np.ones_like(grids[0])
            for g_ in np.meshgrid(*([w] * d), indexing="ij"):
                wts = wts * g_
            Z = m + sigma * np.stack([g.ravel() for g in grids], axis=-1)
            vals = np.abs(P.values(V, Z))
            vals[~np.isfinite(vals)] = 0.0
            results.append(float(np.dot(wts.ravel(), vals)))
        return Expectation(results[1], abs(results[1] - results[0]))
    from scipy.stats import qmc

    means = []
    for rep in range(_SOBOL_REPS):
        u = qmc.Sobol(d, scramble=True, seed=1234 + rep).random_base2(_SOBOL_M)
        Z = m + sigma * stats.norm.ppf(u)
        vals = np.abs(P.values(V, Z))
        vals[~np.isfinite(vals)] = 0.0
        means.append(vals.mean())
    means = np.asarray(means)
    return Expectation(float(means.mean()), float(means.std(ddof=1) / math.sqrt(len(means))), True)


def expectation(V, m, sigma: float, tail_sigma: float = 8.0) -> Expectation:
    """E|V(Z)|, Z ~ N(m, sigma^2 I)."""
    m = np.asarray(m, dtype=float)
    if sigma <= 0:
        if any(np.all(m[sl] == 0) for sl in P.singular_slices(V)):
            raise ValueError("degenerate Gaussian sitting on the singular set")
        return Expectation(float(abs(P.values(V, m[None, :])[0])), 0.0)
    if isinstance(V, P.Constant):
        return Expectation(abs(float(V.value)), 0.0)
    if isinstance(V, P.IndicatorBall):
        return _indicator(V.coeff, V.radius, V.dim, float(np.linalg.norm(m)), sigma)
    if isinstance(V, P.Tensor):
        out = Expectation(1.0, 0.0)
        start = 0
        for f in V.factors:
            e = expectation(f, m[start:start + f.dim], sigma, tail_sigma)
            if e.value == 0 and e.error == 0:
                return ZERO
            out = out * e
            start += f.dim
        return out
    if isinstance(V, P.Dilate):
        rs = math.sqrt(V.s)
        return expectation(V.inner, rs * m, rs * sigma, tail_sigma).scaled(V.s)
    if isinstance(V, P.SlabCounterexample):
        return _slab(V, m, sigma, tail_sigma)
    if isinstance(V, P.WeightedSum) and P.sign_of(V) is not None:
        val = err = 0.0
        mc = False
        for w, t in V.terms:
            if w == 0:
                continue
            e = expectation(t, m, sigma, tail_sigma)
            val += abs(w) * e.value
            err += abs(w) * e.error
            mc = mc or e.monte_carlo
        return Expectation(val, err, mc)
    if P.is_radial(V):
        return radial_expectation(P.radial_profile(V), V.dim, float(np.linalg.norm(m)), sigma, tail_sigma)
    return _generic(V, m, sigma)
