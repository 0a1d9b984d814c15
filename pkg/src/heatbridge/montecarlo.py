"""Monte Carlo oracles built on Gaussian and Brownian bridges.

Randomness is counter based: sample indices are grouped in fixed-size chunks
and every chunk draws from its own Philox stream keyed by (seed, purpose,
chunk index). Chunk partial sums are merged in chunk order, so results do not
depend on how many threads evaluate the chunks.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import potentials as P
from .kernels import as_point

_PURPOSE = {"bridge_point": 1, "mc_S": 2, "path": 3, "refine": 4}


@dataclass(frozen=True)
class McConfig:
    seed: int = 0
    n_samples: int = 100_000
    n_time_steps: int = 256
    time_sampling: str = "uniform"  # uniform | stratified
    chunk_size: int = 2048
    threads: int = 1

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.n_samples < 100:
            raise ValueError("n_samples must be >= 100")
        n = self.n_time_steps
        if n < 2 or n & (n - 1):
            raise ValueError("n_time_steps must be a power of two >= 2")
        if self.time_sampling not in ("uniform", "stratified"):
            raise ValueError("time_sampling must be uniform or stratified")
        if self.chunk_size < 1 or self.threads < 1:
            raise ValueError("chunk_size and threads must be positive")

    def fingerprint(self) -> str:
        # threads is excluded: it never changes results
        d = asdict(self)
        d.pop("threads")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, obj: dict) -> "McConfig":
        unknown = set(obj) - set(asdict(cls()))
        if unknown:
            raise ValueError(f"unknown mc keys {sorted(unknown)}")
        return cls(**obj)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    fingerprint: str
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def within(self, target: float, k: float = 4.0, floor: float = 1e-12) -> bool:
        """|mean - target| <= k standard errors (with a floating-point floor)."""
        return abs(self.mean - target) <= k * self.std_error + floor * max(1.0, abs(target))


def stream(seed: int, purpose: str, chunk: int) -> np.random.Generator:
    """The Philox stream for one chunk of one estimator."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_PURPOSE[purpose], int(chunk)))
    return np.random.Generator(np.random.Philox(ss))


def sample_bridge_point(s: float, t: float, x, y, rng: np.random.Generator, size: int | None = None):
    """Draw from the Gaussian bridge law at time s (mean on [x, y], variance 2s(t-s)/t)."""
    x, y = as_point(x), as_point(y)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same dimension")
    if not 0 < s < t:
        raise ValueError("bridge time s must lie in (0, t)")
    mean = x + (s / t) * (y - x)
    sd = math.sqrt(2 * s * (t - s) / t)
    shape = (x.size,) if size is None else (size, x.size)
    return mean + sd * rng.standard_normal(shape)


def _run_chunks(cfg: McConfig, work):
    """Evaluate `work(chunk, lo, hi) -> samples` over all chunks; merge in order."""
    n = cfg.n_samples
    bounds = [(c, lo, min(lo + cfg.chunk_size, n)) for c, lo in enumerate(range(0, n, cfg.chunk_size))]
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(lambda b: work(*b), bounds))
    else:
        parts = [work(*b) for b in bounds]
    return np.concatenate(parts)


def _estimate(samples: np.ndarray, cfg: McConfig) -> McEstimate:
    n = samples.size
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(mean, se, n, cfg.fingerprint(), int(cfg.seed))


def _check(V, x, y, t):
    x, y = as_point(x, V.dim), as_point(y, V.dim)
    if not t > 0:
        raise ValueError("t must be positive")
    return x, y


def mc_S(V, t: float, x, y, cfg: McConfig = McConfig()) -> McEstimate:
    """t E_{s ~ U(0,t)} E_{z ~ bridge(s)} |V(z)|, stratified in s when requested or V is singular."""
    x, y = _check(V, x, y, t)
    d = V.dim
    n = cfg.n_samples
    stratified = cfg.time_sampling == "stratified" or bool(P.singular_slices(V))

    def work(chunk, lo, hi):
        rng = stream(cfg.seed, "mc_S", chunk)
        m = hi - lo
        u = rng.random(m)
        if stratified:
            s = t * (np.arange(lo, hi) + u) / n
        else:
            s = t * u
        s = np.clip(s, t * 1e-300, t * (1 - 1e-16))
        mean = x + (s / t)[:, None] * (y - x)
        sd = np.sqrt(2 * s * (t - s) / t)
        z = mean + sd[:, None] * rng.standard_normal((m, d))
        vals = np.abs(P.values(V, z))
        vals[~np.isfinite(vals)] = 0.0  # probability-zero hits
        return t * vals

    return _estimate(_run_chunks(cfg, work), cfg)


# --------------------------------------------------------------------------
# Brownian bridge paths


def bridge_paths(t: float, x, y, n_steps: int, rng: np.random.Generator, m: int) -> np.ndarray:
    """m bridges from x (time 0) to y (time t) on n_steps + 1 equispaced times.

    Built by bisection for a Brownian motion with variance 2r per coordinate: the
    midpoint of an interval of length h has conditional variance h/2. Normals are
    drawn level by level, so a path with 2n steps refines the one with n steps.
    """
    d = x.size
    path = np.empty((m, n_steps + 1, d))
    path[:, 0] = x
    path[:, -1] = y
    step = n_steps
    while step > 1:
        half = step // 2
        h = step * t / n_steps
        idx = np.arange(half, n_steps, step)
        z = rng.standard_normal((m, idx.size, d))
        path[:, idx] = 0.5 * (path[:, idx - half] + path[:, idx + half]) + math.sqrt(h / 2) * z
        step = half
    return path


def _path_integral(V, path: np.ndarray, t: float, rng: np.random.Generator) -> np.ndarray:
    """Trapezoid rule for int_0^t V(B_r) dr, refined 4x near the singular set."""
    m, n1, d = path.shape
    n = n1 - 1
    h = t / n
    vals = P.values(V, path)
    total = h * (vals[:, 1:-1].sum(axis=1) + 0.5 * (vals[:, 0] + vals[:, -1]))
    slices = P.singular_slices(V)
    if not slices:
        return total
    # intervals with an endpoint within a few diffusion lengths of the singular set
    dist = P.distance_to_singular_set(V, path)
    near = (np.minimum(dist[:, :-1], dist[:, 1:]) < 3 * math.sqrt(2 * h))
    rows, cols = np.nonzero(near)
    if rows.size:
        a, b = path[rows, cols], path[rows, cols + 1]
        # two more bisection levels inside each flagged interval: 5 points, spacing h/4
        sub = np.empty((rows.size, 5, d))
        sub[:, 0], sub[:, 4] = a, b
        sub[:, 2] = 0.5 * (a + b) + math.sqrt(h / 4) * rng.standard_normal((rows.size, d))
        sub[:, 1] = 0.5 * (sub[:, 0] + sub[:, 2]) + math.sqrt(h / 8) * rng.standard_normal((rows.size, d))
        sub[:, 3] = 0.5 * (sub[:, 2] + sub[:, 4]) + math.sqrt(h / 8) * rng.standard_normal((rows.size, d))
        sv = P.values(V, sub)
        sv = _fill_singular(sv)
        fine = (h / 4) * (sv[:, 1:4].sum(axis=1) + 0.5 * (sv[:, 0] + sv[:, 4]))
        coarse = h * 0.5 * (vals[rows, cols] + vals[rows, cols + 1])
        coarse = np.where(np.isfinite(coarse), coarse, 0.0)
        np.add.at(total, rows, fine - coarse)
    bad = ~np.isfinite(total)
    if bad.any():
        v = _fill_singular(vals[bad])
        total[bad] = h * (v[:, 1:-1].sum(axis=1) + 0.5 * (v[:, 0] + v[:, -1]))
    return total


def _fill_singular(v: np.ndarray) -> np.ndarray:
    """Replace infinite values by the nearest finite neighbour along the path."""
    v = v.copy()
    for row in v:
        bad = ~np.isfinite(row)
        if bad.any():
            good = np.nonzero(~bad)[0]
            if good.size == 0:
                row[:] = 0.0
                continue
            idx = np.nonzero(bad)[0]
            nearest = good[np.argmin(np.abs(idx[:, None] - good[None, :]), axis=1)]
            row[idx] = row[nearest]
    return v


def _path_work(V, t, x, y, cfg: McConfig, fn):
    def work(chunk, lo, hi):
        rng = stream(cfg.seed, "path", chunk)
        paths = bridge_paths(t, x, y, cfg.n_time_steps, rng, hi - lo)
        ref = stream(cfg.seed, "refine", chunk)
        return fn(_path_integral(V, paths, t, ref))

    return _estimate(_run_chunks(cfg, work), cfg)


def fk_ratio(V, t: float, x, y, cfg: McConfig = McConfig()) -> McEstimate:
    """E exp(int_0^t V(B_r) dr) over the bridge from x to y: the ratio G/g for V <= 0."""
    x, y = _check(V, x, y, t)
    if P.sign_of(V) not in (0, -1):
        raise ValueError("fk_ratio needs V <= 0 (the positive part must vanish)")
    if P.sign_of(V) == 0:
        return McEstimate(1.0, 0.0, cfg.n_samples, cfg.fingerprint(), int(cfg.seed))
    return _path_work(V, t, x, y, cfg, np.exp)


def perturbation_term(n: int, V, t: float, x, y, cfg: McConfig = McConfig()) -> McEstimate:
    """p_n / g = E[(int_0^t V(B_r) dr)^n] / n! over the bridge, n <= 2."""
    if n not in (0, 1, 2):
        raise ValueError("perturbation_term supports n in {0, 1, 2}")
    x, y = _check(V, x, y, t)
    if P.sign_of(V) is None:
        raise ValueError("perturbation_term needs V of one sign")
    if n == 0:
        return McEstimate(1.0, 0.0, cfg.n_samples, cfg.fingerprint(), int(cfg.seed))
    fact = math.factorial(n)
    return _path_work(V, t, x, y, cfg, lambda I: I ** n / fact)


@dataclass
class Certificate:
    name: str
    lhs: float
    rhs: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def bound_certificates(V, t: float, x, y, h: float, cfg: McConfig = McConfig(), T: float = 1.0,
                       f_hat=None, F_hat=None, S_value: float | None = None, k: float = 4.0) -> dict:
    """Check e^{-S} <= G/g <= 1 and the exponential lower bound C e^{-ct} <= G/g.

    `f_hat(t)` estimates sup_{x,y} S(V,t,x,y) and `F_hat(t)` its running max;
    both default to the supsearch estimators. ln C = -F_hat(T), c = f_hat(T)/T.
    The remaining line checks f_hat(t) <= F_hat(h) + t f_hat(h)/h.
    """
    from . import functionals, supsearch

    if P.sign_of(V) not in (0, -1):
        raise ValueError("bound_certificates needs V <= 0")
    if not h > 0:
        raise ValueError("h must be positive")
    if f_hat is None:
        f_hat = lambda s: supsearch.f_of_t(V, s).sup_estimate
    if F_hat is None:
        F_hat = lambda s: supsearch.F_of_t(V, s, f_hat=f_hat)
    fk = fk_ratio(V, t, x, y, cfg)
    if S_value is None:
        S_value = functionals.S_bridge(V, t, x, y).value
    slack = k * fk.std_error + 1e-12
    lnC = -F_hat(T)
    c = f_hat(T) / T
    lower_exp = math.exp(lnC - c * t)
    checks = [
        Certificate("jensen_lower", math.exp(-S_value), fk.mean + slack, math.exp(-S_value) <= fk.mean + slack),
        Certificate("upper_one", fk.mean, 1.0, fk.mean <= 1.0 + 1e-12),
        Certificate("exponential_lower", lower_exp, fk.mean + slack, lower_exp <= fk.mean + slack),
        Certificate("f_step_bound", f_hat(t), F_hat(h) + t * f_hat(h) / h,
                    f_hat(t) <= F_hat(h) + t * f_hat(h) / h + 1e-9 * max(1.0, f_hat(t))),
    ]
    return {"fk_ratio": fk.to_dict(), "S": S_value, "ln_C": lnC, "c": c, "T": T, "t": t, "h": h,
            "checks": [ch.to_dict() for ch in checks], "passed": all(ch.passed for ch in checks)}
