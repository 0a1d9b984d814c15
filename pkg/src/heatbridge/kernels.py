"""Closed-form kernels and special functions.

All kernel values are carried in log space (`KernelValue.log_value`) and only
exponentiated on access, so probes with large |y - x|^2 / t do not underflow.
Points are plain 1-d float arrays; `as_point` validates them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

MAX_DIM = 12
EULER_GAMMA = 0.57721566490153286061


@dataclass(frozen=True)
class KernelValue:
    """A nonnegative kernel value stored through its natural log."""

    log_value: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value > -math.inf else 0.0

    @classmethod
    def from_value(cls, value: float) -> "KernelValue":
        if value < 0:
            raise ValueError(f"kernel values are nonnegative, got {value}")
        return cls(math.log(value) if value > 0 else -math.inf)

    def __float__(self) -> float:
        return self.value


def as_point(p, dim: int | None = None) -> np.ndarray:
    """Coerce `p` to a finite 1-d float array, optionally checking its length."""
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.ndim != 1:
        raise ValueError("a point must be a 1-d sequence of coordinates")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"point has non-finite coordinates: {arr}")
    if dim is not None and arr.size != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {arr.size}")
    if arr.size > MAX_DIM:
        raise ValueError(f"dimension {arr.size} exceeds the cap d <= {MAX_DIM}")
    return arr


def _pair(x, y):
    x = as_point(x)
    y = as_point(y, x.size)
    return x, y


def newtonian_constant(d: int) -> float:
    """C_d = Gamma(d/2 - 1) / (4 pi^(d/2)), defined for d >= 3."""
    if d < 3:
        raise ValueError("the Newtonian kernel needs d >= 3")
    return math.gamma(d / 2 - 1) / (4 * math.pi ** (d / 2))


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere S^(d-1) in R^d (d >= 1; S^0 has 2 points)."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


# --------------------------------------------------------------------------
# heat kernel and bridges


def log_gauss_kernel(t: float, x, y) -> float:
    x, y = _pair(x, y)
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")
    d = x.size
    r2 = float(np.sum((y - x) ** 2))
    return -0.5 * d * math.log(4 * math.pi * t) - r2 / (4 * t)


def gauss_kernel(t: float, x, y) -> KernelValue:
    """Gauss-Weierstrass kernel (4 pi t)^(-d/2) exp(-|y - x|^2 / (4t))."""
    return KernelValue(log_gauss_kernel(t, x, y))


def bridge_moments(s: float, t: float, x, y) -> tuple[np.ndarray, float]:
    """Mean and per-coordinate variance of the bridge density at time s."""
    x, y = _pair(x, y)
    if not 0 < s < t:
        raise ValueError(f"bridge time must satisfy 0 < s < t, got s={s}, t={t}")
    return x + (s / t) * (y - x), 2.0 * s * (t - s) / t


def bridge_density(s: float, t: float, x, y, z) -> KernelValue:
    """g(s,x,z) g(t-s,z,y) / g(t,x,y), evaluated as the equivalent Gaussian in z.

    The ratio equals an isotropic Gaussian density with mean x + (s/t)(y - x)
    and variance 2 s (t - s)/t per coordinate; `bridge_density_ratio` keeps the
    literal three-kernel form for cross-checking.
    """
    mean, var = bridge_moments(s, t, x, y)
    z = as_point(z, mean.size)
    d = mean.size
    r2 = float(np.sum((z - mean) ** 2))
    return KernelValue(-0.5 * d * math.log(2 * math.pi * var) - r2 / (2 * var))


def bridge_density_ratio(s: float, t: float, x, y, z) -> KernelValue:
    if not 0 < s < t:
        raise ValueError(f"bridge time must satisfy 0 < s < t, got s={s}, t={t}")
    return KernelValue(
        log_gauss_kernel(s, x, z) + log_gauss_kernel(t - s, z, y) - log_gauss_kernel(t, x, y)
    )


# --------------------------------------------------------------------------
# Newtonian kernel and K


def newtonian_kernel(x, z) -> KernelValue:
    x, z = _pair(x, z)
    d = x.size
    r = float(np.linalg.norm(z - x))
    if r == 0:
        raise ValueError("Newtonian kernel is singular at z = x")
    return KernelValue(math.log(newtonian_constant(d)) + (2 - d) * math.log(r))


def log_kernel_K_radial(r, y_norm, cos_angle, d: int):
    """log K(u, y) in terms of r = |u|, |y| and the cosine of the angle between u and y.

    Vectorized over numpy inputs; used by the K-functional quadratures.
    """
    r = np.asarray(r, dtype=float)
    ry = r * y_norm
    return -0.5 * ry * (1.0 - cos_angle) + (2 - d) * np.log(r) + 0.5 * (d - 3) * np.log1p(ry)


def kernel_K(x, y) -> KernelValue:
    """K(x, y) = exp(-(|x||y| - x.y)/2) |x|^(2-d) (1 + |x||y|)^(d/2 - 3/2)."""
    x, y = _pair(x, y)
    d = x.size
    if d < 3:
        raise ValueError("K is defined for d >= 3")
    rx = float(np.linalg.norm(x))
    if rx == 0:
        raise ValueError("K(x, y) is singular at x = 0")
    ry = float(np.linalg.norm(y))
    gap = max(rx * ry - float(x @ y), 0.0)
    return KernelValue(-0.5 * gap + (2 - d) * math.log(rx) + 0.5 * (d - 3) * math.log1p(rx * ry))


# --------------------------------------------------------------------------
# modified Bessel functions of the second kind


def _check_order(nu: float) -> int:
    twice = 2 * nu
    if nu < 0.5 or abs(twice - round(twice)) > 1e-12:
        raise ValueError(f"unsupported Bessel order {nu}; need nu in {{1/2, 1, 3/2, ...}}")
    return int(round(twice))


def _log_kv_half_integer(n2: int, z: float) -> float:
    # scaled values k_nu = K_nu(z) e^z, upward recurrence from K_{-1/2} = K_{1/2}
    base = 0.5 * math.log(math.pi / (2 * z))
    k_prev, k_cur, nu = 1.0, 1.0, 0.5
    while 2 * nu < n2:
        k_prev, k_cur = k_cur, k_prev + (2 * nu / z) * k_cur
        nu += 1
    return base + math.log(k_cur) - z


def _log_kv_integer_series(n: int, z: float) -> float:
    # K_n(z) = 1/2 (z/2)^-n sum_{k<n} (n-k-1)!/k! (-z^2/4)^k + (-1)^(n+1) ln(z/2) I_n(z)
    #          + (-1)^n 1/2 (z/2)^n sum_k (psi(k+1) + psi(n+k+1)) (z^2/4)^k / (k! (n+k)!)
    q = z * z / 4
    finite = 0.0
    if n > 0:
        finite = 0.5 * (z / 2) ** (-n) * sum(
            math.factorial(n - k - 1) / math.factorial(k) * (-q) ** k for k in range(n)
        )
    i_n = 0.0
    tail = 0.0
    term = (z / 2) ** n / math.factorial(n)
    psi_a = -EULER_GAMMA
    psi_b = -EULER_GAMMA + sum(1.0 / j for j in range(1, n + 1))
    for k in range(60):
        i_n += term
        tail += (psi_a + psi_b) * term
        if abs(term) < 1e-18 * abs(i_n):
            break
        term *= q / ((k + 1) * (n + k + 1))
        psi_a += 1.0 / (k + 1)
        psi_b += 1.0 / (n + k + 1)
    val = finite + (-1) ** (n + 1) * math.log(z / 2) * i_n + (-1) ** n * 0.5 * tail
    return math.log(val)


def _log_kv_integral(nu: float, z: float) -> float:
    # K_nu(z) e^z = int_0^inf exp(-z (cosh u - 1)) cosh(nu u) du; the trapezoid rule
    # converges geometrically for this analytic, doubly-exponentially decaying integrand
    u_max = math.acosh(1.0 + 750.0 / z) + 1.0
    h = min(0.05, 0.5 / math.sqrt(z)) if z > 1 else 0.05
    u = np.arange(0.0, u_max + h, h)
    f = np.exp(-z * (np.cosh(u) - 1.0) + nu * u) * 0.5 * (1 + np.exp(-2 * nu * u))
    val = h * (f.sum() - 0.5 * f[0])
    return math.log(val) - z


def log_bessel_k(nu: float, z: float) -> float:
    """Natural log of K_nu(z) for nu in {1/2, 1, 3/2, ...}, z > 0."""
    n2 = _check_order(nu)
    if not z > 0:
        raise ValueError(f"Bessel argument must be positive, got {z}")
    if n2 % 2 == 1:
        return _log_kv_half_integer(n2, z)
    n = n2 // 2
    if z <= 2.0:
        return _log_kv_integer_series(n, z)
    return _log_kv_integral(float(n), z)


def bessel_k(nu: float, z: float) -> float:
    return math.exp(log_bessel_k(nu, z))


def bessel_k_integral(nu: float, z: float) -> float:
    """K_nu(z) from the integral representation, by adaptive quadrature."""
    if not z > 0:
        raise ValueError(f"Bessel argument must be positive, got {z}")
    # beyond u_max the integrand is below e^-750 of its value at 0
    u_max = math.acosh(1.0 + 750.0 / z) + 1.0
    val, _ = integrate.quad(
        lambda u: math.exp(-z * (math.cosh(u) - 1.0)) * math.cosh(nu * u),
        0, u_max, epsabs=0, epsrel=1e-13, limit=200,
    )
    return val * math.exp(-z)


def log_bessel_k_comparison(nu: float, z: float) -> float:
    return -nu * math.log(z) - z + (nu - 0.5) * math.log1p(z)


def bessel_k_comparison(nu: float, z: float) -> float:
    """z^-nu e^-z (1 + z)^(nu - 1/2), the two-sided comparison profile of K_nu."""
    return math.exp(log_bessel_k_comparison(nu, z))


# --------------------------------------------------------------------------
# J


def kernel_J(x, w, lam: float = 0.0) -> KernelValue:
    """int_0^inf tau^(-d/2) exp(-lam tau) exp(-|x - tau w|^2 / (4 tau)) dtau, via K_(d/2-1).

    With mu = sqrt(|w|^2 + 4 lam) the closed form is
    2 exp(x.w/2) (|x|/mu)^(1-d/2) K_(d/2-1)(|x| mu / 2); at mu = 0 the Newtonian
    limit Gamma(d/2 - 1) (|x|^2/4)^(1-d/2) is returned.
    """
    x, w = _pair(x, w)
    d = x.size
    if d < 3:
        raise ValueError("J is used for d >= 3")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    rx = float(np.linalg.norm(x))
    if rx == 0:
        raise ValueError("J(x, w) is singular at x = 0")
    mu = math.sqrt(float(w @ w) + 4 * lam)
    if mu == 0:
        return KernelValue(math.lgamma(d / 2 - 1) + (1 - d / 2) * math.log(rx * rx / 4))
    nu = d / 2 - 1
    return KernelValue(
        math.log(2.0) + 0.5 * float(x @ w) + (1 - d / 2) * math.log(rx / mu)
        + log_bessel_k(nu, rx * mu / 2)
    )


def kernel_J_quadrature(x, w, lam: float = 0.0, rel_tol: float = 1e-11) -> KernelValue:
    """J by direct quadrature in u = log(tau), scaled by the integrand's peak."""
    x, w = _pair(x, w)
    d = x.size
    rx2 = float(x @ x)
    if rx2 == 0:
        raise ValueError("J(x, w) is singular at x = 0")
    xw = float(x @ w)
    mu2 = float(w @ w) + 4 * lam

    def phi(u):
        tau = math.exp(u)
        return (1 - d / 2) * u - rx2 / (4 * tau) + xw / 2 - tau * mu2 / 4

    # the log-integrand is concave in u; locate its peak
    if mu2 > 0:
        # d/du: (1 - d/2) + rx2/(4 tau) - tau mu2/4 = 0
        a, b, c = mu2 / 4, d / 2 - 1, -rx2 / 4
        tau_star = (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)
    else:
        tau_star = rx2 / (4 * (d / 2 - 1))
    u0 = math.log(tau_star)
    peak = phi(u0)

    def f(u):
        if abs(u - u0) > 600:
            return 0.0
        return math.exp(phi(u) - peak)

    total = 0.0
    for lo, hi in ((-math.inf, u0 - 2), (u0 - 2, u0 + 2), (u0 + 2, math.inf)):
        val, _ = integrate.quad(f, lo, hi, epsabs=0, epsrel=rel_tol, limit=200)
        total += val
    return KernelValue(math.log(total) + peak)
