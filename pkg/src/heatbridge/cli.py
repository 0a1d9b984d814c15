"""Command-line interface: `heatbridge <command> [options]`.

Commands: kernel, functional, sup, mc, constants, verify. Options may also come
from a JSON config file (`--config`); flags override the file. Exit codes:
0 success, 1 verification failure, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from . import functionals as Fn
from . import kernels as Kr
from . import montecarlo as Mc
from . import potentials as P
from . import supsearch as Ss
from . import verify as Vf
from .serial import atomic_write, to_json

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

# keys a config file may carry; everything else is rejected
CONFIG_KEYS = {"command", "potential", "quadrature", "mc", "search", "output", "seed", "threads", "params"}
PARAM_KEYS = {"which", "t", "s", "x", "y", "z", "w", "lam", "T", "nu", "r", "truncation", "tau_max", "h",
              "n", "d", "p", "suite", "samples"}
SEARCH_KEYS = {"x_box", "y_box", "t_range", "t_points", "t_fixed", "symmetry", "probe_directions",
               "probe_radius", "n_starts", "max_evals", "xatol", "fatol"}
OUTPUT_KEYS = {"path", "format"}


class ConfigError(Exception):
    pass


class NumericalFailure(Exception):
    pass


# --------------------------------------------------------------------------
# parsing helpers


def parse_point(text, dim: int | None = None) -> np.ndarray:
    """'0,0,1' or a list -> array; dimension cross-checked when given."""
    if isinstance(text, str):
        try:
            vals = [float(c) for c in text.split(",") if c.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad point {text!r}: {exc}") from None
    else:
        vals = [float(c) for c in text]
    if not vals:
        raise ConfigError("empty point")
    if dim is not None and len(vals) != dim:
        raise ConfigError(f"point {text!r} has {len(vals)} coordinates, the potential has dim {dim}")
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"point {text!r} has non-finite coordinates")
    return np.asarray(vals)


def parse_pair(text) -> tuple:
    vals = parse_point(text)
    if len(vals) != 2:
        raise ConfigError(f"expected 'lo,hi', got {text!r}")
    return float(vals[0]), float(vals[1])


def parse_float(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    t = str(text).strip().lower()
    if t in ("inf", "infinity"):
        return math.inf
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def load_potential(src):
    """Inline JSON, a path to a JSON file, or an already-decoded dict."""
    if src is None:
        raise ConfigError("a potential is required (--potential)")
    try:
        if isinstance(src, dict):
            return P.from_dict(src)
        text = str(src).strip()
        if not text.startswith("{"):
            if not os.path.exists(text):
                raise ConfigError(f"potential file not found: {text}")
            with open(text) as fh:
                text = fh.read()
        return P.parse_potential(text)
    except P.SpecError as exc:
        raise ConfigError(f"potential: {exc}") from None


def load_config(path) -> dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(cfg, CONFIG_KEYS, "")
    _reject_unknown(cfg.get("params", {}), PARAM_KEYS, "/params")
    _reject_unknown(cfg.get("search", {}), SEARCH_KEYS, "/search")
    _reject_unknown(cfg.get("output", {}), OUTPUT_KEYS, "/output")
    return cfg


def _reject_unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where or '/'} must be an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys at {where or '/'}: {unknown}")


class Settings:
    """Flags first, then the config file, then defaults."""

    def __init__(self, args: argparse.Namespace, cfg: dict):
        self.args, self.cfg = args, cfg
        if cfg.get("command") not in (None, args.command):
            raise ConfigError(f"config is for command {cfg['command']!r}, not {args.command!r}")

    def get(self, key, default=None):
        v = getattr(self.args, key, None)
        if v is not None:
            return v
        for section in ("params",):
            if key in self.cfg.get(section, {}):
                return self.cfg[section][key]
        if key in ("seed", "threads", "potential") and key in self.cfg:
            return self.cfg[key]
        return default

    def require(self, key):
        v = self.get(key)
        if v is None:
            raise ConfigError(f"--{key.replace('_', '-')} is required")
        return v

    def quadrature(self) -> Fn.QuadratureConfig:
        d = dict(self.cfg.get("quadrature", {}))
        for k in ("rel_tol", "abs_tol", "max_subdivisions", "tail_sigma"):
            v = getattr(self.args, k, None)
            if v is not None:
                d[k] = v
        try:
            return Fn.QuadratureConfig.from_dict(d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"quadrature: {exc}") from None

    def mc(self) -> Mc.McConfig:
        d = dict(self.cfg.get("mc", {}))
        for flag, key in (("samples", "n_samples"), ("steps", "n_time_steps"), ("time_sampling", "time_sampling"),
                          ("seed", "seed"), ("threads", "threads")):
            v = self.get(flag)
            if v is not None:
                d[key] = v
        try:
            return Mc.McConfig.from_dict(d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"mc: {exc}") from None

    def output(self) -> tuple:
        out = self.cfg.get("output", {})
        path = self.args.output if self.args.output is not None else out.get("path")
        fmt = self.args.format if self.args.format is not None else out.get("format", "json")
        if fmt not in ("json", "csv"):
            raise ConfigError(f"unknown output format {fmt!r}")
        return path, fmt


def emit(settings: Settings, payload: dict, rows=None) -> None:
    path, fmt = settings.output()
    if fmt == "csv":
        if rows is None:
            raise ConfigError("this command has no CSV form; use --format json")
        text = Fn.csv_text(rows)
    else:
        text = to_json(payload)
    if path:
        atomic_write(path, text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# commands


def cmd_kernel(s: Settings) -> int:
    which = s.require("which")
    p = lambda k: parse_point(s.require(k))
    if which == "gauss":
        kv = Kr.gauss_kernel(parse_float(s.require("t")), p("x"), p("y"))
    elif which == "bridge":
        kv = Kr.bridge_density(parse_float(s.require("s")), parse_float(s.require("t")), p("x"), p("y"), p("z"))
    elif which == "newtonian":
        kv = Kr.newtonian_kernel(p("x"), p("z"))
    elif which == "K":
        kv = Kr.kernel_K(p("x"), p("y"))
    elif which == "J":
        kv = Kr.kernel_J(p("x"), p("w"), parse_float(s.get("lam", 0.0)))
    elif which == "J_quadrature":
        kv = Kr.kernel_J_quadrature(p("x"), p("w"), parse_float(s.get("lam", 0.0)))
    elif which == "bessel":
        v = Kr.bessel_k(parse_float(s.require("nu")), parse_float(s.require("r")))
        kv = Kr.KernelValue.from_value(v)
    else:
        raise ConfigError(f"unknown kernel {which!r}")
    emit(s, {"kernel": which, "value": kv.value, "log_value": kv.log_value})
    return EXIT_OK


def _functional_row(name, V, t, x, y, res) -> dict:
    return {"functional": name, "potential_id": Fn.potential_id(V), "t": t, "x": x, "y": y,
            "value": res.value, "error": res.error_estimate, "method": res.method}


def cmd_functional(s: Settings) -> int:
    which = s.require("which")
    V = load_potential(s.get("potential"))
    q = s.quadrature()
    pt = lambda k: parse_point(s.require(k), V.dim)
    t = x = y = None
    if which == "S":
        t, x, y = parse_float(s.require("t")), pt("x"), pt("y")
        res = Fn.S_bridge(V, t, x, y, q)
    elif which == "N":
        t, x, y = parse_float(s.require("t")), pt("x"), pt("y")
        res = Fn.N_functional(V, t, x, y, q)
    elif which == "K":
        x, y = pt("x"), pt("y")
        res = Fn.K_functional(V, x, y, q, parse_float(s.get("truncation", math.inf)))
    elif which == "newtonian":
        x = pt("x")
        res = Fn.newtonian_potential(V, x, q)
    elif which == "heat":
        t, x = parse_float(s.require("T")), pt("x")
        res = Fn.heat_potential(V, t, x, q)
    elif which == "e_star_integral":
        x, y = pt("y"), pt("w")
        res = Fn.e_star_integral(V, parse_float(s.get("lam", 0.0)), x, y, q,
                                 parse_float(s.get("tau_max", math.inf)))
    elif which == "e_star":
        res = Fn.e_star(V, parse_float(s.get("lam", 0.0)), q, _domain(s, V, (-4.0, 4.0), (-2.0, 2.0)),
                        _search_cfg(s, q))
    else:
        raise ConfigError(f"unknown functional {which!r}")
    payload = {"functional": which, "potential": P.to_dict(V), "potential_id": Fn.potential_id(V),
               "t": t, "x": x, "y": y, "result": res.to_dict()}
    emit(s, payload, [_functional_row(which, V, t, x, y, res)])
    if not res.converged:
        raise NumericalFailure(f"{which}: quadrature did not reach the requested tolerance")
    return EXIT_OK


def _search_cfg(s: Settings, q) -> Ss.SearchConfig:
    sec = s.cfg.get("search", {})
    kw = {k: sec[k] for k in ("n_starts", "max_evals", "xatol", "fatol") if k in sec}
    for k in ("n_starts", "max_evals"):
        if getattr(s.args, k, None) is not None:
            kw[k] = getattr(s.args, k)
    return Ss.SearchConfig(seed=int(s.get("seed", 0)), quadrature=q, **kw)


_SEARCH_RUN_KEYS = ("n_starts", "max_evals", "xatol", "fatol")


def _domain(s: Settings, V, x_box=(-8.0, 8.0), y_box=(-8.0, 8.0), t_fixed=None, hints=()) -> Ss.SearchDomain:
    sec = {k: v for k, v in s.cfg.get("search", {}).items() if k not in _SEARCH_RUN_KEYS}
    a = s.args
    for key in ("x_box", "y_box", "t_range"):
        if getattr(a, key, None) is not None:
            sec[key] = parse_pair(getattr(a, key))
    if getattr(a, "t_points", None) is not None:
        sec["t_points"] = a.t_points
    if getattr(a, "symmetry", None) is not None:
        sec["symmetry"] = [h for h in a.symmetry.split(",") if h]
    sec.setdefault("x_box", x_box)
    sec.setdefault("y_box", y_box)
    sec.setdefault("symmetry", list(hints))
    if t_fixed is not None and "t_range" not in sec:
        sec.setdefault("t_fixed", t_fixed)
    sec = {k: tuple(v) if isinstance(v, list) else v for k, v in sec.items()}
    try:
        return Ss.SearchDomain(V.dim, **sec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"search domain: {exc}") from None


def cmd_sup(s: Settings) -> int:
    which = s.require("which")
    V = load_potential(s.get("potential"))
    q = s.quadrature()
    cfg = _search_cfg(s, q)
    t = s.get("t")
    if which == "S":
        dom = _domain(s, V, t_fixed=parse_float(t) if t is not None else None, hints=("swap_xy",))
        if dom.t_fixed is None and dom.t_range is None:
            raise ConfigError("sup --which S needs --t or --t-range")
        res = Ss.sup_search(Ss.S_handle(V, q), V, dom, cfg)
    elif which == "N":
        dom = _domain(s, V, t_fixed=parse_float(t) if t is not None else None, hints=("swap_xy",))
        if dom.t_fixed is None and dom.t_range is None:
            raise ConfigError("sup --which N needs --t or --t-range")
        res = Ss.sup_search(lambda tt, x, y: Fn.N_functional(V, tt, x, y, q), V, dom, cfg)
    elif which == "K":
        res = Ss.sup_search(lambda tt, x, y: Fn.K_functional(V, x, y, q), V, _domain(s, V), cfg)
    elif which == "e_star":
        lam = parse_float(s.get("lam", 0.0))
        dom = _domain(s, V, (-4.0, 4.0), (-2.0, 2.0))
        res = Ss.sup_search(lambda tt, y, w: Fn.e_star_integral(V, lam, y, w, q), V, dom, cfg)
    else:
        raise ConfigError(f"unknown sup functional {which!r}")
    emit(s, {"functional": which, "potential_id": Fn.potential_id(V), "search": res.to_dict(),
             "config": cfg.to_dict()})
    if res.n_evals and res.n_failures == res.n_evals:
        raise NumericalFailure("every evaluation failed")
    return EXIT_OK


def cmd_mc(s: Settings) -> int:
    which = s.require("which")
    V = load_potential(s.get("potential"))
    mc = s.mc()
    t = parse_float(s.require("t"))
    x, y = parse_point(s.require("x"), V.dim), parse_point(s.require("y"), V.dim)
    if which == "fk":
        est = Mc.fk_ratio(V, t, x, y, mc)
    elif which == "S":
        est = Mc.mc_S(V, t, x, y, mc)
    elif which == "term":
        est = Mc.perturbation_term(int(s.require("n")), V, t, x, y, mc)
    elif which == "certificates":
        rep = Mc.bound_certificates(V, t, x, y, parse_float(s.get("h", 0.5)), mc, T=parse_float(s.get("T", 1.0)))
        emit(s, {"which": which, "potential_id": Fn.potential_id(V), "report": rep, "mc": asdict(mc)})
        return EXIT_OK if rep["passed"] else EXIT_VERIFY
    else:
        raise ConfigError(f"unknown mc estimator {which!r}")
    row = {"functional": f"mc_{which}", "potential_id": Fn.potential_id(V), "t": t, "x": x, "y": y,
           "value": est.mean, "error": est.std_error, "method": f"monte_carlo(seed={est.seed})"}
    emit(s, {"which": which, "potential_id": Fn.potential_id(V), "estimate": est.to_dict(), "mc": asdict(mc)},
         [row])
    return EXIT_OK


def cmd_constants(s: Settings) -> int:
    d = int(s.require("d"))
    ps = s.get("p", "1,2,inf")
    try:
        p_list = [Fn.parse_p(c) for c in (ps.split(",") if isinstance(ps, str) else ps)]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    table = Fn.constants(d, p_list, cache_path=s.get("cache"))
    emit(s, table.to_dict())
    return EXIT_OK


def cmd_verify(s: Settings) -> int:
    suites = s.get("suite")
    if suites is None:
        suites = list(Vf.SUITES)
    elif isinstance(suites, str):
        suites = [x for x in suites.split(",") if x]
    else:
        suites = [x for item in suites for x in str(item).split(",") if x]
    unknown = [x for x in suites if x not in Vf.SUITES]
    if unknown:
        raise ConfigError(f"unknown suites {unknown}; choose from {list(Vf.SUITES)}")
    samples = s.get("samples")
    ctx = Vf.Context(seed=int(s.get("seed", 7)), d=s.get("d"), threads=int(s.get("threads", 1)),
                     mc_samples=int(samples) if samples is not None else None)
    progress = None
    if s.args.verbose:
        progress = lambda c: print(f"{c.status.upper():4s} {c.name} ({c.runtime:.1f} s)", file=sys.stderr)
    report = Vf.run(suites, ctx, timestamp=not s.args.no_timestamp, progress=progress)
    emit(s, report)
    return EXIT_OK if report["status"] == "pass" else EXIT_VERIFY


COMMANDS = {"kernel": cmd_kernel, "functional": cmd_functional, "sup": cmd_sup, "mc": cmd_mc,
            "constants": cmd_constants, "verify": cmd_verify}


# --------------------------------------------------------------------------
# argument parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config; flags override its values")
    common.add_argument("--output", "-o", help="output path (written atomically); default stdout")
    common.add_argument("--format", choices=("json", "csv"), help="output format (default json)")
    common.add_argument("--seed", type=int, help="run seed")
    common.add_argument("--threads", type=int, help="worker bound; never changes results")

    quad = argparse.ArgumentParser(add_help=False)
    quad.add_argument("--rel-tol", dest="rel_tol", type=float)
    quad.add_argument("--abs-tol", dest="abs_tol", type=float)
    quad.add_argument("--max-subdivisions", dest="max_subdivisions", type=int)
    quad.add_argument("--tail-sigma", dest="tail_sigma", type=float)

    pot = argparse.ArgumentParser(add_help=False)
    pot.add_argument("--potential", help="potential spec: inline JSON or a path to a JSON file")

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--x-box", dest="x_box", help="lo,hi")
    search.add_argument("--y-box", dest="y_box", help="lo,hi")
    search.add_argument("--t-range", dest="t_range", help="t_min,t_max (log grid)")
    search.add_argument("--t-points", dest="t_points", type=int)
    search.add_argument("--symmetry", help="comma list of swap_xy, axis, plane")
    search.add_argument("--n-starts", dest="n_starts", type=int)
    search.add_argument("--max-evals", dest="max_evals", type=int)

    ap = argparse.ArgumentParser(prog="heatbridge", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"heatbridge {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", parents=[common], help="closed-form kernels")
    k.add_argument("--which", choices=("gauss", "bridge", "newtonian", "K", "J", "J_quadrature", "bessel"))
    for name in ("x", "y", "z", "w"):
        k.add_argument(f"--{name}", help="comma-separated coordinates")
    for name in ("t", "s", "lam", "nu", "r"):
        k.add_argument(f"--{name}")

    f = sub.add_parser("functional", parents=[common, quad, pot, search], help="evaluate one functional")
    f.add_argument("--which", choices=("S", "N", "K", "newtonian", "heat", "e_star_integral", "e_star"))
    for name in ("x", "y", "w"):
        f.add_argument(f"--{name}", help="comma-separated coordinates")
    f.add_argument("--t")
    f.add_argument("--T", help="heat potential horizon (inf allowed for d >= 3)")
    f.add_argument("--lam")
    f.add_argument("--truncation", help="K truncation radius")
    f.add_argument("--tau-max", dest="tau_max")

    sp = sub.add_parser("sup", parents=[common, quad, pot, search], help="supremum search")
    sp.add_argument("--which", choices=("S", "N", "K", "e_star"))
    sp.add_argument("--t", help="fixed t for S and N")
    sp.add_argument("--lam")

    m = sub.add_parser("mc", parents=[common, pot], help="Monte Carlo estimators")
    m.add_argument("--which", choices=("fk", "S", "term", "certificates"))
    m.add_argument("--t")
    m.add_argument("--x")
    m.add_argument("--y")
    m.add_argument("--n", type=int, help="perturbation order for --which term")
    m.add_argument("--h", help="certificate step h")
    m.add_argument("--T", help="certificate horizon")
    m.add_argument("--samples", type=int)
    m.add_argument("--steps", type=int, help="time steps (power of two)")
    m.add_argument("--time-sampling", dest="time_sampling", choices=("uniform", "stratified"))

    c = sub.add_parser("constants", parents=[common], help="C_d, C(d,p), kappa_d")
    c.add_argument("--d", type=int)
    c.add_argument("--p", help="comma list, e.g. 1,2,inf")
    c.add_argument("--cache", help="JSON constants cache for kappa_d")

    v = sub.add_parser("verify", parents=[common], help="run acceptance suites")
    v.add_argument("--suite", action="append", help=f"one of {', '.join(Vf.SUITES)} (repeatable; default all)")
    v.add_argument("--d", type=int, help="dimension override for the counterexample suite")
    v.add_argument("--samples", type=int, help="override Monte Carlo sample counts")
    v.add_argument("--no-timestamp", dest="no_timestamp", action="store_true",
                   help="omit timestamps and runtimes for byte-stable reports")
    v.add_argument("--verbose", "-v", action="store_true", help="progress lines on stderr")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        settings = Settings(args, load_config(args.config))
        return COMMANDS[args.command](settings)
    except (ConfigError, P.SpecError) as exc:
        print(f"heatbridge: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"heatbridge: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ArithmeticError as exc:
        print(f"heatbridge: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # precondition violations on user input (bad t, point on a singularity, ...)
        print(f"heatbridge: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
