"""Acceptance suites run by `heatbridge verify`.

Every numbered acceptance criterion maps to exactly one named check; checks
without a criterion number cover further invariants. A report is a plain dict
rendered by `serial.to_json`; with timestamps disabled it depends only on the
seed and the options that change numerics (never on `threads`).
"""

from __future__ import annotations

import hashlib
import math
import platform
import time
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from . import functionals as Fn
from . import kernels as Kr
from . import montecarlo as Mc
from . import potentials as P
from . import supsearch as Ss

SCHEMA_VERSION = "1.0"
INF = math.inf

SUITES = ("identities", "constants", "bridges", "subadditivity", "comparability",
          "tensor_bounds", "counterexample", "examples", "montecarlo")


@dataclass
class Context:
    seed: int = 7
    d: int | None = None  # dimension override where a suite has one (counterexample)
    threads: int = 1
    mc_samples: int | None = None  # None: the criteria's sample counts

    def rng(self, tag: str) -> np.random.Generator:
        key = int.from_bytes(hashlib.sha256(tag.encode()).digest()[:4], "little")
        return np.random.default_rng([self.seed, key])

    def mc(self, n_default: int = 100_000) -> Mc.McConfig:
        return Mc.McConfig(seed=self.seed, n_samples=self.mc_samples or n_default, threads=self.threads)


@dataclass
class Check:
    name: str
    criterion: int | None
    status: str  # pass | fail | skip
    measured: object
    expected: object
    tolerance: object
    details: dict = field(default_factory=dict)
    runtime: float | None = None

    def to_dict(self, with_runtime: bool = True) -> dict:
        d = {"name": self.name, "criterion": self.criterion, "status": self.status,
             "measured": self.measured, "expected": self.expected, "tolerance": self.tolerance,
             "details": self.details}
        if with_runtime:
            d["runtime_s"] = self.runtime
        return d


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _e(i: int, d: int) -> np.ndarray:
    v = np.zeros(d)
    v[i] = 1.0
    return v


# --------------------------------------------------------------------------
# identities


def check_j_bessel(ctx: Context) -> Check:
    rng = ctx.rng("j_bessel")
    worst = 0.0
    rows = {}
    for d in (3, 4, 5, 6):
        dmax = 0.0
        for _ in range(20):
            x = rng.normal(size=d) * math.exp(rng.uniform(-1, 1))
            w = rng.normal(size=d) * math.exp(rng.uniform(-1, 1))
            for lam in (0.0, 1.0):
                a = Kr.kernel_J(x, w, lam)
                b = Kr.kernel_J_quadrature(x, w, lam)
                rel = abs(math.expm1(a.log_value - b.log_value))
                dmax = max(dmax, rel)
        rows[str(d)] = dmax
        worst = max(worst, dmax)
    return Check("identities.j_bessel_vs_quadrature", 1, _status(worst <= 1e-8), worst, 0.0, 1e-8,
                 {"max_rel_error_by_d": rows, "samples_per_d": 40})


def _identity_pool(d: int, rng: np.random.Generator) -> list:
    radial = [P.IndicatorBall(d, -1.0, 1.0), P.RadialPower(d, -1.0, 1.0, 1.0),
              P.ShiftedRadialDecay(d, -1.0, 3.0), P.Dilate(d, 4.0, P.IndicatorBall(d, -1.0, 1.0))]
    if d == 3:
        radial.append(P.example_5_4_factor(0.5))
    else:
        radial.append(P.SlabCounterexample(d))
    pairs = []
    for V in radial:
        for _ in range(2):
            if isinstance(V, P.SlabCounterexample):
                x = _e(0, d) * rng.uniform(0.0, 20.0)
            else:
                u = rng.normal(size=d)
                x = u / np.linalg.norm(u) * rng.uniform(0.2, 3.0)
            pairs.append((V, x))
    return pairs


def check_k_newtonian(ctx: Context) -> Check:
    rng = ctx.rng("k_newtonian")
    worst = 0.0
    rows = []
    for d in (3, 4, 5):
        for V, x in _identity_pool(d, rng):
            k = Fn.K_functional(V, x, np.zeros(d)).value
            n = Fn.newtonian_potential(V, x).value
            rel = abs(k * Fn.C_d(d) - n) / n
            worst = max(worst, rel)
            rows.append({"d": d, "potential": Fn.potential_id(V), "x_norm": float(np.linalg.norm(x)),
                         "rel_error": rel})
    return Check("identities.k_newtonian_identity", 2, _status(worst <= 1e-6), worst, 0.0, 1e-6,
                 {"pairs": rows})


def check_s_symmetry(ctx: Context) -> Check:
    rng = ctx.rng("s_symmetry")
    pots = [P.IndicatorBall(3, -1.0, 1.0), P.example_5_4_factor(0.5), P.example_5_3(4), P.example_5_1(2.0, 3)]
    worst = 0.0
    for V in pots:
        for _ in range(3):
            x, y = rng.normal(size=V.dim), rng.normal(size=V.dim)
            t = float(np.exp(rng.uniform(-2, 2)))
            a, b = Fn.S_bridge(V, t, x, y).value, Fn.S_bridge(V, t, y, x).value
            worst = max(worst, abs(a - b) / max(a, 1e-300))
    tol = 10 * Fn.DEFAULT.rel_tol
    return Check("identities.s_symmetry", None, _status(worst <= tol), worst, 0.0, tol)


def check_n_sandwich(ctx: Context) -> Check:
    rng = ctx.rng("n_sandwich")
    pots = [P.Constant(3, -1.0), P.IndicatorBall(3, -1.0, 1.0), P.ShiftedRadialDecay(3, -1.0, 3.0)]
    ok = True
    rows = []
    for V in pots:
        for _ in range(3):
            x, y = rng.normal(size=3), rng.normal(size=3)
            t = float(np.exp(rng.uniform(-1, 1)))
            a, b = Fn.N_pieces(V, t, x, y)
            n = Fn.N_functional(V, t, x, y).value
            slack = 1e-6 * n
            good = a - slack <= n <= 2 * max(a, b) + slack
            ok &= good
            rows.append({"t": t, "first_piece": a, "second_piece": b, "N": n, "ok": good})
    return Check("identities.n_sandwich", None, _status(ok), ok, True, 1e-6, {"samples": rows})


# --------------------------------------------------------------------------
# constants


def check_constants(ctx: Context) -> Check:
    exact = all(Fn.C_dp(d, 1.0) == (4 * math.pi) ** (-d / 2) and Fn.C_dp(d, INF) == 1.0
                for d in range(1, Kr.MAX_DIM + 1))
    kap = {}
    ok = exact
    for d in (4, 5):
        v, e = Fn.kappa(d)
        rel = e / v
        kap[str(d)] = {"value": v, "error": e, "relative_error": rel}
        ok &= math.isfinite(v) and v > 0 and rel < 1e-6
    measured = {"closed_forms_exact": exact, "kappa": kap}
    return Check("constants.closed_forms_and_kappa", 3, _status(ok), measured,
                 {"C(d,1)": "(4 pi)^(-d/2)", "C(d,inf)": 1.0, "kappa": "finite"}, 1e-6)


# --------------------------------------------------------------------------
# bridges


def check_bridge_bound(ctx: Context) -> Check:
    rng = ctx.rng("bridges")
    worst = 0.0
    count = 0
    for d in (3, 4):
        pts = [(np.zeros(d), np.zeros(d))] + [(rng.normal(size=d), rng.normal(size=d)) for _ in range(4)]
        for radius in (0.3, 1.0, 3.0):
            f = P.IndicatorBall(d, 1.0, radius)
            for p in (1.0, 2.0, INF):
                norm = P.lp_norm(f, p).value
                for t in np.geomspace(0.01, 100.0, 5):
                    for frac in (0.05, 0.25, 0.5, 0.75, 0.95):
                        s = frac * t
                        bound = Fn.bridge_sup_bound(d, p, s, t, norm)
                        for x, y in pts:
                            v = Fn.bridge_semigroup(f, s, t, x, y)
                            worst = max(worst, v / bound)
                            count += 1
    return Check("bridges.bridge_sup_bound", 5, _status(worst <= 1 + 1e-9), worst, 1.0, 1e-9,
                 {"probes": count, "measured_is": "max probe / bound"})


def check_bridge_moments(ctx: Context) -> Check:
    n = 100_000
    rng = Mc.stream(ctx.seed, "bridge_point", 0)
    z = Mc.sample_bridge_point(0.25, 1.0, np.zeros(3), 2 * _e(0, 3), rng, size=n)
    mean, var = z.mean(axis=0), z.var(axis=0, ddof=1)
    se_mean = np.sqrt(0.375 / n)
    se_var = 0.375 * math.sqrt(2 / (n - 1))
    ok = bool(np.all(np.abs(mean - [0.5, 0, 0]) <= 4 * se_mean) and np.all(np.abs(var - 0.375) <= 4 * se_var))
    return Check("bridges.sampler_moments", None, _status(ok), {"mean": mean.tolist(), "variance": var.tolist()},
                 {"mean": [0.5, 0.0, 0.0], "variance": 0.375}, "4 standard errors")


# --------------------------------------------------------------------------
# subadditivity


_SUB_GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


def _in_grid(t: float):
    for g in _SUB_GRID:
        if abs(t - g) < 1e-12:
            return g
    return None


def check_subadditivity(ctx: Context) -> Check:
    pots = [("constant", P.Constant(3, -1.0)), ("example_5_3_d4", P.example_5_3(4)),
            ("example_5_1_p2_d3", P.example_5_1(2.0, 3))]
    scfg = Ss.SearchConfig(n_starts=3, seed=ctx.seed, max_evals=120)
    worst = -INF
    per = {}
    for name, V in pots:
        fh = Ss.FHat(V, scfg)
        f = {t: fh.f(t) for t in _SUB_GRID}
        tol = {t: fh.tol(t) for t in _SUB_GRID}
        margins = []
        for i, t1 in enumerate(_SUB_GRID):
            for t2 in _SUB_GRID[i:]:
                t12 = _in_grid(t1 + t2)
                if t12 is None:
                    continue
                margins.append(f[t12] - f[t1] - f[t2] - 3 * (tol[t1] + tol[t2] + tol[t12]))
        for t in _SUB_GRID:
            t2 = _in_grid(2 * t)
            if t2 is not None:
                margins.append(fh.F(t2, _SUB_GRID) - 2 * fh.F(t, _SUB_GRID) - (tol[t2] + 2 * tol[t]))
        # step bound f(t) <= F(h) + t f(h) / h
        for t in _SUB_GRID:
            for h in _SUB_GRID:
                margins.append(f[t] - fh.F(h, _SUB_GRID) - t * f[h] / h - tol[t])
        m = max(margins)
        worst = max(worst, m)
        per[name] = {"f_hat": {repr(t): v for t, v in f.items()}, "max_margin": m}
    return Check("subadditivity.chapman_subadditivity", 6, _status(worst <= 0), worst, 0.0,
                 "3 x search tolerance", {"potentials": per, "measured_is": "max(lhs - rhs - tol)"})


# --------------------------------------------------------------------------
# tensor bounds


def check_explicit_constants(ctx: Context) -> Check:
    rng = ctx.rng("tensor_bounds")
    pts = [(np.zeros(3), np.zeros(3))] + [(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)) for _ in range(4)]
    times = (0.01, 0.1, 1.0)
    # the example's family on R x R^2 with p = 2
    V = P.example_5_1(2.0, 3)
    params = Fn.example_5_1_parameters(p=2.0, p1=1.2, r=1.5, d=3)
    norms = {"V1": P.lp_norm(V.factors[0], params["r"]).value, "V2": P.lp_norm(V.factors[1], params["p2"]).value}
    cases = [("tensor_a", V, params, norms)]
    W = P.IndicatorBall(3, -1.0, 1.0)
    cases.append(("zhang_a", W, {"d": 3, "p": 2.0}, {"V": P.lp_norm(W, 2.0).value}))
    worst = 0.0
    rows = {}
    for kind, U, prm, nrm in cases:
        c = Fn.theorem_bound(kind, prm, nrm)
        e = Fn.bound_exponent(kind, prm)
        ratio = max(Fn.S_bridge(U, t, x, y).value / (c * t ** e) for t in times for x, y in pts)
        worst = max(worst, ratio)
        rows[kind] = {"c": c, "exponent": e, "max_ratio": ratio, "params": prm, "norms": nrm}
    return Check("tensor_bounds.explicit_constants", 7, _status(worst <= 1.0), worst, 1.0, 0.0,
                 {"cases": rows, "measured_is": "max S / (c t^e)"})


# --------------------------------------------------------------------------
# counterexample


def _slab_d(ctx: Context) -> int:
    return ctx.d if ctx.d is not None and ctx.d >= 4 else 4


def check_slab(ctx: Context) -> Check:
    d = _slab_d(ctx)
    V = P.counterexample_slab(d)
    y = _e(0, d)
    k_trend = Ss.divergence_probe(lambda R: Fn.K_functional(V, np.zeros(d), y, truncation_radius=R),
                                  V, 1e2, n_rungs=5, factor=10.0)
    n_trend = Ss.divergence_probe(lambda a: Fn.newtonian_potential(V, a * y), V, 4.0, n_rungs=6,
                                  factor=10.0, running_max=True)
    inc = np.asarray(k_trend.increments)
    spread = float(np.max(np.abs(inc / inc.mean() - 1))) if inc.size else INF
    ok = (k_trend.verdict == "divergent_trend" and k_trend.law == "logarithmic" and spread <= 0.25
          and n_trend.verdict == "bounded")
    measured = {"K_verdict": k_trend.verdict, "K_law": k_trend.law, "K_increment_spread": spread,
                "newtonian_verdict": n_trend.verdict}
    expected = {"K_verdict": "divergent_trend", "K_law": "logarithmic", "newtonian_verdict": "bounded"}
    return Check("counterexample.slab_dichotomy", 8, _status(ok), measured, expected,
                 {"K_increment_spread": Ss.LOG_SPREAD, "decay_threshold": Ss.DECAY_THRESHOLD},
                 {"d": d, "K_trend": k_trend.to_dict(), "newtonian_trend": n_trend.to_dict()})


def check_dilatation(ctx: Context) -> Check:
    rng = ctx.rng("dilatation")
    worst = 0.0
    for V in (P.IndicatorBall(4, -1.0, 1.0), P.ShiftedRadialDecay(3, -1.0, 3.0)):
        for _ in range(3):
            s = float(np.exp(rng.uniform(-1, 2)))
            x, y = rng.normal(size=V.dim), rng.normal(size=V.dim)
            a = Fn.K_functional(P.Dilate(V.dim, s, V), x, y).value
            b = Fn.K_functional(V, math.sqrt(s) * x, y / math.sqrt(s)).value
            worst = max(worst, abs(a - b) / b)
    return Check("counterexample.dilatation_covariance", None, _status(worst <= 1e-6), worst, 0.0, 1e-6)


# --------------------------------------------------------------------------
# comparability


def _comparability_suite():
    return [
        ("indicator_ball_d3", P.IndicatorBall(3, -1.0, 1.0)),
        ("example_5_4_factor_eps05", P.example_5_4_factor(0.5)),
        ("shifted_radial_decay_d3", P.ShiftedRadialDecay(3, -1.0, 3.0)),
        ("indicator_ball_d4", P.IndicatorBall(4, -1.0, 1.0)),
        ("radial_power_d4", P.RadialPower(4, -1.0, 1.0, 1.0)),
        ("slab_d4", P.counterexample_slab(4)),
    ]


# t and tau ladders reach 2^20: slowly decaying tails (|V| not integrable) need it
_RUNGS = 21


def _bounded_estimates(V, ctx: Context) -> dict:
    d = V.dim
    zero = np.zeros(d)
    # S: symmetric decreasing |V| puts the sup at x = y = 0; the ladder is the
    # running max over t, i.e. F-hat on a doubling grid
    s_trend = Ss.divergence_probe(lambda t: Fn.S_bridge(V, t, zero, zero), V, 1.0, n_rungs=_RUNGS,
                                  running_max=True)
    scfg = Ss.SearchConfig(n_starts=4, seed=ctx.seed, max_evals=80)
    k_dom = Ss.SearchDomain(d, symmetry=("axis",))
    k_res = Ss.sup_search(lambda t, x, y: Fn.K_functional(V, x, y), V, k_dom, scfg)
    kx, ky = np.asarray(k_res.arg_sup["x"]), np.asarray(k_res.arg_sup["y"])
    r0 = max(1.0, float(np.linalg.norm(kx)))
    k_trend = Ss.divergence_probe(lambda R: Fn.K_functional(V, kx, ky, truncation_radius=R), V, r0,
                                  n_rungs=8)
    e_dom = Ss.SearchDomain(d, x_box=(-4.0, 4.0), y_box=(-2.0, 2.0), symmetry=("axis",))
    e_res = Ss.sup_search(lambda t, y, w: Fn.e_star_integral(V, 0.0, y, w), V, e_dom, scfg)
    ey, ew = np.asarray(e_res.arg_sup["x"]), np.asarray(e_res.arg_sup["y"])
    e_trend = Ss.divergence_probe(lambda T: Fn.e_star_integral(V, 0.0, ey, ew, tau_max=T), V, 1.0,
                                  n_rungs=_RUNGS)
    return {"S": (s_trend.ladder[-1][1], s_trend), "K": (k_res.sup_estimate, k_trend),
            "e_star": (e_res.sup_estimate, e_trend),
            "args": {"K": k_res.arg_sup, "e_star": e_res.arg_sup}}


def _slab_estimates(V, ctx: Context) -> dict:
    d = V.dim
    zero, e1 = np.zeros(d), _e(0, d)
    s_trend = Ss.divergence_probe(lambda t: Fn.S_bridge(V, t, zero, t * e1), V, 16.0, n_rungs=8)
    k_trend = Ss.divergence_probe(lambda R: Fn.K_functional(V, zero, e1, truncation_radius=R), V, 1e2,
                                  n_rungs=5, factor=10.0)
    e_trend = Ss.divergence_probe(lambda T: Fn.e_star_integral(V, 0.0, zero, e1, tau_max=T), V, 16.0,
                                  n_rungs=8)
    return {"S": (s_trend.ladder[-1][1], s_trend), "K": (k_trend.ladder[-1][1], k_trend),
            "e_star": (e_trend.ladder[-1][1], e_trend), "args": {}}


def check_comparability(ctx: Context) -> Check:
    rows = {}
    agree = True
    ratios: dict = {}
    for name, V in _comparability_suite():
        est = _slab_estimates(V, ctx) if isinstance(V, P.SlabCounterexample) else _bounded_estimates(V, ctx)
        verdicts = {k: est[k][1].verdict for k in ("S", "K", "e_star")}
        sups = {k: est[k][0] for k in ("S", "K", "e_star")}
        same = len(set(verdicts.values())) == 1 and verdicts["S"] != "inconclusive"
        agree &= same
        row = {"dim": V.dim, "verdicts": verdicts, "sup_estimates": sups, "args": est["args"],
               "laws": {k: est[k][1].law for k in ("S", "K", "e_star")}}
        if verdicts["S"] == "bounded" and same:
            scaled_e = (4 * math.pi) ** (V.dim / 2) * sups["e_star"]
            row["S_over_K"] = sups["S"] / sups["K"]
            row["S_over_scaled_e_star"] = sups["S"] / scaled_e
            ratios.setdefault(str(V.dim), []).append(row["S_over_K"])
        rows[name] = row
    brackets = {d: {"low": min(r), "high": max(r), "width": max(r) / min(r)} for d, r in ratios.items()}
    widest = max((b["width"] for b in brackets.values()), default=INF)
    ok = agree and widest <= 10.0
    return Check("comparability.verdicts_and_brackets", 9, _status(ok),
                 {"verdicts_agree": agree, "max_bracket_width": widest},
                 {"verdicts_agree": True, "max_bracket_width": "<= 10"}, 10.0,
                 {"potentials": rows, "S_over_K_brackets": brackets})


def check_kv_two_sided(ctx: Context) -> Check:
    # sup K = K(0, 0) and sup Newtonian = at 0 for symmetric decreasing |V|
    rows = {}
    ok = True
    for V in (P.IndicatorBall(4, -1.0, 1.0), P.RadialPower(4, -1.0, 1.0, 1.0), P.IndicatorBall(5, -1.0, 1.0)):
        d = V.dim
        zero = np.zeros(d)
        dom = Ss.SearchDomain(d, symmetry=("axis",))
        k = Ss.sup_search(lambda t, x, y: Fn.K_functional(V, x, y), V, dom,
                          Ss.SearchConfig(n_starts=4, seed=ctx.seed, max_evals=80)).sup_estimate
        n = Fn.newtonian_potential(V, zero).value / Fn.C_d(d)
        kap = Fn.kappa(d)[0]
        upper = 2 ** ((d - 3) / 2) * (n + kap * P.lp_norm(V, d / 2).value)
        good = n * (1 - 1e-6) <= k <= upper
        ok &= good
        rows[Fn.potential_id(V)] = {"d": d, "lower": n, "K_sup": k, "upper": upper, "ok": good}
    d3 = P.example_5_4_factor(0.5)
    k3 = Fn.K_functional(d3, np.zeros(3), np.zeros(3)).value
    n3 = Fn.newtonian_potential(d3, np.zeros(3)).value
    collapse = abs(k3 * Fn.C_d(3) - n3) / n3
    ok &= collapse <= 1e-6
    return Check("comparability.kv_two_sided", None, _status(ok), {"d3_collapse_rel_error": collapse},
                 "lower <= sup K <= upper", 1e-6, {"potentials": rows})


# --------------------------------------------------------------------------
# examples


def check_example_5_4_newtonian(ctx: Context) -> Check:
    vals = {}
    worst = 0.0
    for eps in (0.0, 0.5):
        v = Fn.newtonian_potential(P.example_5_4_factor(eps), np.zeros(3)).value
        vals[repr(eps)] = v
        worst = max(worst, abs(v - 0.5))
    return Check("examples.example_5_4_newtonian", 4, _status(worst <= 1e-6), vals, 0.5, 1e-6)


def check_example_5_4_cutoff(ctx: Context) -> Check:
    eps = 0.5
    deltas = (1e-1, 1e-2, 1e-3)
    vals = [Fn.heat_potential(P.example_5_4(eps, delta), 1.0, np.zeros(6)).value for delta in deltas]
    factors = [b / a for a, b in zip(vals[:-1], vals[1:])]
    target = 10.0 ** eps  # delta^(-eps) per decade
    dev = max(abs(f / target - 1) for f in factors)
    grows = all(f >= 2.0 for f in factors)
    ok = grows and dev <= 0.3
    return Check("examples.example_5_4_cutoff_growth", 11, _status(ok),
                 {"factors_per_decade": factors, "relative_deviation_from_delta_pow_minus_eps": dev},
                 {"factor_per_decade_min": 2.0, "delta_pow_minus_eps_per_decade": target}, 0.3,
                 {"eps": eps, "deltas": list(deltas), "values": vals,
                  "fitted_exponent": -math.log10(factors[-1])})


# --------------------------------------------------------------------------
# montecarlo


def check_fk_certificates(ctx: Context) -> Check:
    cfg = ctx.mc()
    problems = []
    lam_fk = Mc.fk_ratio(P.Constant(3, -1.0), 1.0, np.zeros(3), np.zeros(3), cfg)
    const_ok = lam_fk.within(math.exp(-1.0))
    if not const_ok:
        problems.append("constant fk_ratio")
    y = 0.5 * _e(0, 4)
    cases = [("constant_d3", P.Constant(3, -1.0), np.zeros(3), np.zeros(3)),
             ("indicator_ball_d3", P.IndicatorBall(3, -1.0, 1.0), np.zeros(3), np.zeros(3)),
             ("example_5_3_d4", P.example_5_3(4), np.zeros(4), y)]
    grid = (0.25, 0.5, 1.0)
    rows = {}
    for name, V, x0, y0 in cases:
        fh = Ss.FHat(V, Ss.SearchConfig(n_starts=3, seed=ctx.seed, max_evals=120))
        F_hat = lambda s, fh=fh: fh.F(s, grid)
        S1 = Fn.S_bridge(V, 1.0, x0, y0).value
        fk = Mc.fk_ratio(V, 1.0, x0, y0, cfg)
        ms = Mc.mc_S(V, 1.0, x0, y0, cfg)
        jensen = math.exp(-S1) <= fk.mean + 4 * fk.std_error
        upper = fk.mean <= 1.0
        mc_ok = ms.within(S1, k=3.0)
        certs = []
        for t in (0.5, 1.0, 2.0):
            rep = Mc.bound_certificates(V, t, x0, y0, 0.5, cfg, T=1.0, f_hat=fh.f, F_hat=F_hat)
            certs.append(rep)
        cert_ok = all(c["passed"] for c in certs)
        for label, good in (("jensen", jensen), ("upper", upper), ("mc_S", mc_ok), ("certificates", cert_ok)):
            if not good:
                problems.append(f"{name}: {label}")
        rows[name] = {"S": S1, "fk_ratio": fk.to_dict(), "mc_S": ms.to_dict(), "certificates": certs}
    ok = not problems
    return Check("montecarlo.fk_certificates", 10, _status(ok),
                 {"constant_fk_ratio": lam_fk.to_dict(), "failures": problems},
                 {"constant_fk_ratio": math.exp(-1.0), "failures": []}, "4 standard errors (mc_S: 3)",
                 {"n_samples": cfg.n_samples, "potentials": rows})


def check_fk_monotone(ctx: Context) -> Check:
    cfg = ctx.mc(20_000)
    V = P.IndicatorBall(3, -1.0, 1.0)
    ests = [Mc.fk_ratio(V, t, np.zeros(3), np.zeros(3), cfg) for t in (0.5, 1.0, 2.0)]
    ok = all(0 < e.mean <= 1 for e in ests)
    for a, b in zip(ests[:-1], ests[1:]):
        ok &= b.mean <= a.mean + 4 * math.hypot(a.std_error, b.std_error)
    return Check("montecarlo.fk_monotone_in_t", None, _status(ok), [e.mean for e in ests], "nonincreasing",
                 "4 joint standard errors")


# --------------------------------------------------------------------------
# runner


REGISTRY = {
    "identities": (check_j_bessel, check_k_newtonian, check_s_symmetry, check_n_sandwich),
    "constants": (check_constants,),
    "bridges": (check_bridge_bound, check_bridge_moments),
    "subadditivity": (check_subadditivity,),
    "comparability": (check_comparability, check_kv_two_sided),
    "tensor_bounds": (check_explicit_constants,),
    "counterexample": (check_slab, check_dilatation),
    "examples": (check_example_5_4_newtonian, check_example_5_4_cutoff),
    "montecarlo": (check_fk_certificates, check_fk_monotone),
}

CRITERION_CHECKS = {
    1: "identities.j_bessel_vs_quadrature",
    2: "identities.k_newtonian_identity",
    3: "constants.closed_forms_and_kappa",
    4: "examples.example_5_4_newtonian",
    5: "bridges.bridge_sup_bound",
    6: "subadditivity.chapman_subadditivity",
    7: "tensor_bounds.explicit_constants",
    8: "counterexample.slab_dichotomy",
    9: "comparability.verdicts_and_brackets",
    10: "montecarlo.fk_certificates",
    11: "examples.example_5_4_cutoff_growth",
}


def run_check(fn, ctx: Context) -> Check:
    t0 = time.perf_counter()
    try:
        chk = fn(ctx)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        chk = Check(fn.__name__, None, "fail", None, None, None, {"error": f"{type(exc).__name__}: {exc}"})
    chk.runtime = time.perf_counter() - t0
    return chk


def config_hash(suites, ctx: Context) -> str:
    doc = {"suites": list(suites), "seed": ctx.seed, "d": ctx.d, "mc_samples": ctx.mc_samples}
    return hashlib.sha256(repr(sorted(doc.items())).encode()).hexdigest()[:16]


def run(suites=SUITES, ctx: Context | None = None, timestamp: bool = True, progress=None) -> dict:
    """Run the named suites and return the report dict."""
    ctx = ctx or Context()
    suites = list(suites)
    unknown = [s for s in suites if s not in REGISTRY]
    if unknown:
        raise ValueError(f"unknown suites {unknown}; choose from {list(SUITES)}")
    checks = []
    for s in suites:
        for fn in REGISTRY[s]:
            chk = run_check(fn, ctx)
            if progress:
                progress(chk)
            checks.append(chk)
    live = [c for c in checks if c.status != "skip"]
    report = {
        "schema_version": SCHEMA_VERSION,
        "suites": suites,
        "status": "pass" if all(c.status == "pass" for c in live) else "fail",
        "environment": {"package": "heatbridge", "version": __version__, "seed": ctx.seed,
                        "config_hash": config_hash(suites, ctx), "python": platform.python_version(),
                        "numpy": np.__version__, "scipy": scipy.__version__},
        "checks": [c.to_dict(with_runtime=timestamp) for c in checks],
    }
    if timestamp:
        report["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return report
