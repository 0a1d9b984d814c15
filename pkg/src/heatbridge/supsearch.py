"""Supremum estimation and divergence-trend detection.

A search maximizes a functional over a box of free coordinates with
Nelder-Mead runs started from the box center and a scrambled Sobol set seeded
by the run seed. Growth along a geometric ladder of scales is classified from
its increments; `classify` holds the thresholds.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from . import functionals as Fn
from . import potentials as P

INF = math.inf

DECAY_THRESHOLD = 0.10  # bounded: increments fall below this share of the first
LOG_SPREAD = 0.25  # logarithmic: increments within this share of their mean
MIN_DOUBLINGS = 4


@dataclass(frozen=True)
class SearchDomain:
    """Boxes for x and y (or y and w for e*), plus a t specification.

    `t_range` is (t_min, t_max) sampled on `t_points` log-spaced values, `t_fixed`
    a single time; both None means the functional has no t. `symmetry` lists
    declared invariances: "swap_xy" (f(x,y) = f(y,x)), "axis" (restrict points to
    the first coordinate axis), "plane" (x on the first axis, y in the first
    coordinate plane). `probe_directions` are unit vectors along which log-radius
    probes reach `probe_radius`.
    """

    dim: int
    x_box: tuple = (-8.0, 8.0)
    y_box: tuple = (-8.0, 8.0)
    t_range: tuple | None = None
    t_points: int = 25
    t_fixed: float | None = None
    symmetry: tuple = ()
    probe_directions: tuple = ()
    probe_radius: float = 1e3

    def __post_init__(self):
        for box in (self.x_box, self.y_box):
            if not box[0] <= box[1]:
                raise ValueError("search boxes must be nonempty")
        if self.t_range is not None and not 0 < self.t_range[0] <= self.t_range[1]:
            raise ValueError("t_range needs 0 < t_min <= t_max")
        if self.t_fixed is not None and not self.t_fixed > 0:
            raise ValueError("t_fixed must be positive")
        unknown = set(self.symmetry) - {"swap_xy", "axis", "plane"}
        if unknown:
            raise ValueError(f"unknown symmetry hints {sorted(unknown)}")

    def times(self) -> list:
        if self.t_fixed is not None:
            return [float(self.t_fixed)]
        if self.t_range is None:
            return [None]
        lo, hi = self.t_range
        if lo == hi:
            return [float(lo)]
        return [float(t) for t in np.geomspace(lo, hi, self.t_points)]

    def n_free(self) -> tuple[int, int]:
        """Free coordinates of the first and second point."""
        if "axis" in self.symmetry:
            return 1, 1
        if "plane" in self.symmetry:
            return 1, min(2, self.dim)
        return self.dim, self.dim

    def embed(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nx, ny = self.n_free()
        x = np.zeros(self.dim)
        y = np.zeros(self.dim)
        x[:nx] = theta[:nx]
        y[:ny] = theta[nx:nx + ny]
        return x, y

    def bounds(self) -> list:
        nx, ny = self.n_free()
        return [tuple(self.x_box)] * nx + [tuple(self.y_box)] * ny


@dataclass(frozen=True)
class SearchConfig:
    n_starts: int = 8
    seed: int = 0
    max_evals: int = 200  # per local run
    xatol: float = 1e-3
    fatol: float = 1e-7
    quadrature: Fn.QuadratureConfig = Fn.DEFAULT

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "quadrature"}
        d["quadrature"] = self.quadrature.to_dict()
        return d


@dataclass
class Trend:
    ladder: list  # (scale, value)
    increments: list
    law: str  # constant | logarithmic | power | unknown
    exponent: float | None
    verdict: str  # bounded | divergent_trend | inconclusive
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SearchResult:
    sup_estimate: float
    arg_sup: dict
    verdict: str
    trend: list = field(default_factory=list)
    growth_law: str = "unknown"
    exponent: float | None = None
    n_starts: int = 0
    seed: int = 0
    n_evals: int = 0
    n_failures: int = 0
    error_estimate: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)


# --------------------------------------------------------------------------
# search


class _Objective:
    """Caches evaluations and records failures and the best point."""

    def __init__(self, fn, domain: SearchDomain, t):
        self.fn, self.domain, self.t = fn, domain, t
        self.cache: dict = {}
        self.failures = 0
        self.best = (-INF, None, 0.0)

    def __call__(self, theta) -> float:
        key = tuple(np.round(np.asarray(theta, dtype=float), 12))
        if key in self.cache:
            return self.cache[key]
        x, y = self.domain.embed(np.asarray(key))
        try:
            res = self.fn(self.t, x, y)
            val, err = (res.value, res.error_estimate) if hasattr(res, "value") else (float(res), 0.0)
            if not math.isfinite(val):
                raise ArithmeticError("non-finite value")
        except (ArithmeticError, ValueError):
            self.failures += 1
            val, err = -INF, 0.0
        self.cache[key] = val
        arg = (tuple(x), tuple(y))
        if val > self.best[0] or (val == self.best[0] and self.best[1] is not None and arg < self.best[1]):
            self.best = (val, arg, err)
        return val


def _starts(domain: SearchDomain, cfg: SearchConfig) -> np.ndarray:
    b = np.asarray(domain.bounds(), dtype=float)
    center = b.mean(axis=1)
    pts = [center]
    if cfg.n_starts > 1:
        n = len(b)
        m = max(1, math.ceil(math.log2(2 * (cfg.n_starts - 1))))
        sob = qmc.Sobol(n, scramble=True, seed=cfg.seed).random_base2(m)
        cand = b[:, 0] + sob * (b[:, 1] - b[:, 0])
        if "swap_xy" in domain.symmetry:
            nx, ny = domain.n_free()
            if nx == ny:
                # half domain: first coordinate of x not above that of y
                keep = cand[:, 0] <= cand[:, nx]
                cand = np.concatenate([cand[keep], cand[~keep]])
        pts.extend(cand[: cfg.n_starts - 1])
    return np.asarray(pts)


def _local(obj: _Objective, start, bounds, cfg: SearchConfig):
    b = np.asarray(bounds, dtype=float)
    if np.all(b[:, 0] == b[:, 1]):
        obj(start)
        return
    width = np.maximum(b[:, 1] - b[:, 0], 1e-12)
    simplex = [start]
    for i in range(len(start)):
        p = start.copy()
        step = 0.1 * width[i]
        p[i] = p[i] + step if p[i] + step <= b[i, 1] else p[i] - step
        simplex.append(p)
    # failed evaluations (-inf) become a large finite penalty for the simplex
    optimize.minimize(lambda th: min(-obj(th), 1e300), start, method="Nelder-Mead", bounds=bounds,
                      options={"maxfev": cfg.max_evals, "xatol": cfg.xatol, "fatol": cfg.fatol,
                               "initial_simplex": np.asarray(simplex)})


def sup_search(functional, V, domain: SearchDomain, cfg: SearchConfig = SearchConfig()) -> SearchResult:
    """Maximize functional(t, x, y) over the domain.

    `functional` is a callable (t, x, y) -> FunctionalResult or float. For the
    t-free functionals (K, e*) t is passed as None.
    """
    best = (-INF, None, 0.0, None)
    trend = []
    evals = failures = 0
    bounds = domain.bounds()
    for t in domain.times():
        obj = _Objective(functional, domain, t)
        for start in _starts(domain, cfg):
            _local(obj, np.asarray(start, dtype=float), bounds, cfg)
        for direction in domain.probe_directions:
            direction = np.asarray(direction, dtype=float)
            direction = direction / np.linalg.norm(direction)
            hi_box = max(abs(domain.x_box[0]), abs(domain.x_box[1]), abs(domain.y_box[0]), abs(domain.y_box[1]), 1.0)
            for R in np.geomspace(hi_box, domain.probe_radius, 8):
                _probe(obj, domain, R * direction)
        evals += len(obj.cache)
        failures += obj.failures
        val, arg, err = obj.best
        if t is not None:
            trend.append((t, val))
        if val > best[0]:
            best = (val, arg, err, t)
    verdict, law, expo = "inconclusive", "unknown", None
    if len(trend) >= 5:
        tr = classify(trend)
        verdict, law, expo = tr.verdict, tr.law, tr.exponent
    if evals and failures > 0.2 * evals:
        verdict = "inconclusive"
    val, arg, err, t = best
    arg_sup = {"t": t, "x": [float(c) for c in arg[0]] if arg else None,
               "y": [float(c) for c in arg[1]] if arg else None}
    return SearchResult(float(val), arg_sup, verdict, trend, law, expo, cfg.n_starts, cfg.seed,
                        evals, failures, float(err))


def _probe(obj: _Objective, domain: SearchDomain, vec: np.ndarray):
    """Evaluate with the second point moved to `vec` (first point at the origin)."""
    nx, ny = domain.n_free()
    theta = np.zeros(nx + ny)
    theta[nx:] = vec[:ny]
    obj(theta)


# --------------------------------------------------------------------------
# f(t) and F(t)


def default_domain(V, t=None, **kw) -> SearchDomain:
    hints = ("swap_xy",)
    return SearchDomain(V.dim, t_fixed=t, symmetry=hints, **kw)


def S_handle(V, cfg: Fn.QuadratureConfig = Fn.DEFAULT):
    return lambda t, x, y: Fn.S_bridge(V, t, x, y, cfg)


def f_of_t(V, t: float, cfg: SearchConfig = SearchConfig(n_starts=3, max_evals=120),
           domain: SearchDomain | None = None) -> SearchResult:
    """sup_{x,y} S(V,t,x,y) by search at fixed t."""
    if not t > 0:
        raise ValueError("t must be positive")
    domain = domain or default_domain(V)
    domain = SearchDomain(**{**asdict(domain), "t_fixed": float(t), "t_range": None})
    return sup_search(S_handle(V, cfg.quadrature), V, domain, cfg)


def F_of_t(V, t: float, grid=None, f_hat=None, cfg: SearchConfig | None = None) -> float:
    """Running max of f over a t-grid ending at t (default: 8 halvings of t)."""
    if grid is None:
        grid = [t * 2.0 ** -k for k in range(8, -1, -1)]
    grid = [s for s in grid if s <= t * (1 + 1e-12)]
    if f_hat is None:
        scfg = cfg or SearchConfig(n_starts=3, max_evals=120)
        f_hat = lambda s: f_of_t(V, s, scfg).sup_estimate
    return max(f_hat(s) for s in grid)


class FHat:
    """Memoized f-hat and F-hat on a shared grid, as used by the acceptance checks."""

    def __init__(self, V, cfg: SearchConfig = SearchConfig(n_starts=3, max_evals=120),
                 domain: SearchDomain | None = None):
        self.V, self.cfg, self.domain = V, cfg, domain
        self.results: dict = {}

    def result(self, t: float) -> SearchResult:
        key = float(t)
        if key not in self.results:
            self.results[key] = f_of_t(self.V, key, self.cfg, self.domain)
        return self.results[key]

    def f(self, t: float) -> float:
        return self.result(t).sup_estimate

    def tol(self, t: float) -> float:
        r = self.result(t)
        return r.error_estimate + self.cfg.fatol * max(1.0, abs(r.sup_estimate))

    def F(self, t: float, grid) -> float:
        return max(self.f(s) for s in grid if s <= t * (1 + 1e-12))


# --------------------------------------------------------------------------
# divergence trends


def classify(ladder, rel_noise: float = 1e-6) -> Trend:
    """Classify growth along a geometric ladder of (scale, value) pairs."""
    ladder = sorted((float(s), float(v)) for s, v in ladder)
    if len(ladder) < 5:
        return Trend(ladder, [], "unknown", None, "inconclusive", "need >= 5 scales")
    scales = np.array([s for s, _ in ladder])
    vals = np.array([v for _, v in ladder])
    ratios = scales[1:] / scales[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-6) or ratios[0] <= 1:
        return Trend(ladder, [], "unknown", None, "inconclusive", "scales are not geometric")
    inc = np.diff(vals)
    noise = rel_noise * max(np.max(np.abs(vals)), 1e-300)
    if np.any(inc < -noise):
        return Trend(ladder, inc.tolist(), "unknown", None, "inconclusive", "non-monotone ladder")
    doublings = math.log2(scales[-1] / scales[0])
    first = inc[0]
    if first <= noise or inc[-1] < DECAY_THRESHOLD * first:
        return Trend(ladder, inc.tolist(), "constant", None, "bounded", "increments decay")
    pos = inc[inc > noise]
    growth = inc[1:] / np.maximum(inc[:-1], noise)
    mean = float(np.mean(inc))
    if np.all(np.abs(inc / mean - 1) <= LOG_SPREAD):
        verdict = "divergent_trend" if doublings >= MIN_DOUBLINGS else "inconclusive"
        return Trend(ladder, inc.tolist(), "logarithmic", None, verdict, f"{doublings:.1f} doublings")
    if pos.size == inc.size and np.all(growth > 1 + LOG_SPREAD):
        expo = float(np.mean(np.log(growth)) / math.log(ratios[0]))
        verdict = "divergent_trend" if doublings >= MIN_DOUBLINGS else "inconclusive"
        return Trend(ladder, inc.tolist(), "power", expo, verdict, f"{doublings:.1f} doublings")
    return Trend(ladder, inc.tolist(), "unknown", None, "inconclusive", "no growth law fits")


def divergence_probe(functional, V, scale0: float, n_rungs: int = 6, factor: float = 2.0,
                     running_max: bool = False) -> Trend:
    """Evaluate functional(scale) on scale0 * factor^k and classify the growth.

    With `running_max` the ladder records the running maximum (a sup over a
    growing domain).
    """
    if n_rungs < 5:
        raise ValueError("a ladder needs >= 5 scales")
    ladder = []
    best = -INF
    for k in range(n_rungs):
        s = scale0 * factor ** k
        r = functional(s)
        v = r.value if hasattr(r, "value") else float(r)
        if running_max:
            best = max(best, v)
            v = best
        ladder.append((s, v))
    return classify(ladder)


# --------------------------------------------------------------------------
# e*


def e_star_search(V, lam: float, qcfg: Fn.QuadratureConfig = Fn.DEFAULT,
                  domain: SearchDomain | None = None, cfg: SearchConfig | None = None) -> Fn.FunctionalResult:
    """sup over (y, w) of the drifted heat potential; y in x_box, w in y_box."""
    cfg = cfg or SearchConfig(n_starts=4, max_evals=150, quadrature=qcfg)
    domain = domain or SearchDomain(V.dim, x_box=(-4.0, 4.0), y_box=(-2.0, 2.0))
    handle = lambda t, y, w: Fn.e_star_integral(V, lam, y, w, qcfg)
    res = sup_search(handle, V, domain, cfg)
    return Fn.FunctionalResult(res.sup_estimate, res.error_estimate, "quadrature",
                               {"arg_sup": res.arg_sup, "n_evals": res.n_evals, "converged": True})
