"""Batch experiment runner.

A JSON config names the system, factor, measure, potential, schedules and
a list of computations.  Every computation is evaluated in memory first;
the CSVs, a long-format plot file and a manifest are then written by a
single writer.  Exit codes: 0 success, 2 validation error, 3 capacity
error in an exact request.  Partial outputs are removed on failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import sys as _sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, checks
from .covers import adapted_cover, fiber_adapted_partition, tame_partition
from .entropy import brin_katok_report, cover_entropy, katok_report, shapira_report
from .errors import CapacityError, RelMdimError
from .measures import Measure, ProductSpec, product_measure
from .metric_core import Potential
from .pressure import mdim_estimate, nu_averaged_report, relative_report
from .systems import (build_block_factor, build_full_shift, build_hilbert_shift,
                      identity_factor, trivial_factor)
from .varprin import (THEOREMS, Budget, MeasureFamily, lw_fiberwise_check, remark54_consistency,
                      vp_check)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_CAPACITY = 0, 2, 3


class ConfigError(RelMdimError):
    """The experiment config is malformed; the message names the key."""


DEFAULTS = {
    "system": {"kind": "full", "k": 2, "g": None, "W": 1, "n_max": 6, "sample_cap": None,
               "seed": 0},
    "factor": {"kind": "trivial", "code": None},
    "measure": {"kind": "bernoulli", "p": None, "matrix": None},
    "family": {"kind": "bernoulli-simplex", "constraint": None},
    "potential": {"kind": "constant", "value": 0.0, "values": None},
    "eps_schedule": [0.5, 0.25, 0.125],
    "n_schedule": None,
    "rho_schedule": [0.4, 0.2, 0.1, 0.05],
    "budget": {"grid": 10, "iterations": 50, "restarts": 2},
    "exact_cap": None,
    "mode": "auto",
    "computations": [],
}
TOP_KEYS = set(DEFAULTS) | {"seed", "output"}
COMPUTATION_KEYS = {
    "pressure": {"kind", "eps", "scope"},
    "entropy": {"notion", "eps", "rho", "sample"},
    "mdim": {"eps_schedule", "cross_check"},
    "check": {"suite", "instances"},
    "vp": {"theorem", "eps"},
    "remark54": {"n"},
    "partition": {"kind", "eps", "rho"},
}
ENTROPY_NOTIONS = ("partition", "shapira", "katok", "bk")


# ---------------------------------------------------------------------------
# config validation


def _merge(section: str, given, defaults: dict) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{section}: expected an object")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"{section}.{unknown[0]}: unknown key")
    out = dict(defaults)
    out.update(given)
    return out


def _positive_list(key: str, values, decreasing=False, integer=False) -> list:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{key}: expected a nonempty list")
    try:
        vals = [int(v) if integer else float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: entries must be numbers") from None
    if integer and any(int(v) != v for v in values):
        raise ConfigError(f"{key}: entries must be integers")
    if any(not v > 0 or not math.isfinite(v) for v in vals):
        raise ConfigError(f"{key}: entries must be positive")
    pairs = list(zip(vals, vals[1:]))
    if decreasing and any(b >= a for a, b in pairs):
        raise ConfigError(f"{key}: must be strictly decreasing")
    if not decreasing and any(b <= a for a, b in pairs):
        raise ConfigError(f"{key}: must be strictly increasing")
    return vals


def normalize_config(raw: dict) -> dict:
    """Fill defaults and validate; unknown keys anywhere are rejected."""
    if not isinstance(raw, dict):
        raise ConfigError("config: expected an object")
    unknown = sorted(set(raw) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    if "seed" not in raw:
        raise ConfigError("seed: required")
    if not isinstance(raw["seed"], int) or isinstance(raw["seed"], bool) or raw["seed"] < 0:
        raise ConfigError("seed: must be a nonnegative integer")
    cfg = {"seed": raw["seed"]}
    for section in ("system", "factor", "measure", "family", "potential", "budget"):
        cfg[section] = _merge(section, raw.get(section, {}), DEFAULTS[section])
    s = cfg["system"]
    if s["kind"] not in ("full", "hilbert"):
        raise ConfigError("system.kind: must be 'full' or 'hilbert'")
    for key in ("W", "n_max"):
        if not isinstance(s[key], int) or s[key] < 1:
            raise ConfigError(f"system.{key}: must be a positive integer")
    if s["kind"] == "hilbert" and (not isinstance(s["g"], int) or s["g"] < 2):
        raise ConfigError("system.g: hilbert systems need an integer g >= 2")
    if s["kind"] == "full" and (not isinstance(s["k"], int) or s["k"] < 2):
        raise ConfigError("system.k: must be an integer >= 2")
    if cfg["factor"]["kind"] not in ("trivial", "identity", "code"):
        raise ConfigError("factor.kind: must be trivial, identity or code")
    if cfg["factor"]["kind"] == "code" and not isinstance(cfg["factor"]["code"], list):
        raise ConfigError("factor.code: a code factor needs a symbol list")
    if cfg["measure"]["kind"] not in ("bernoulli", "markov", "uniform"):
        raise ConfigError("measure.kind: must be bernoulli, markov or uniform")
    if cfg["family"]["kind"] not in ("bernoulli-simplex", "markov-matrices"):
        raise ConfigError("family.kind: must be bernoulli-simplex or markov-matrices")
    if cfg["potential"]["kind"] not in ("constant", "coordinate", "table"):
        raise ConfigError("potential.kind: must be constant, coordinate or table")
    for key in ("grid", "iterations", "restarts"):
        v = cfg["budget"][key]
        if not isinstance(v, int) or v < (1 if key == "grid" else 0):
            raise ConfigError(f"budget.{key}: must be a nonnegative integer")
    cfg["eps_schedule"] = _positive_list("eps_schedule", raw.get("eps_schedule",
                                                                 DEFAULTS["eps_schedule"]),
                                         decreasing=True)
    ns = raw.get("n_schedule") or list(range(1, s["n_max"] + 1))
    cfg["n_schedule"] = _positive_list("n_schedule", ns, integer=True)
    if max(cfg["n_schedule"]) > s["n_max"]:
        raise ConfigError("n_schedule: entries must not exceed system.n_max")
    rhos = _positive_list("rho_schedule", raw.get("rho_schedule", DEFAULTS["rho_schedule"]),
                          decreasing=True)
    if any(r >= 1 for r in rhos):
        raise ConfigError("rho_schedule: entries must lie in (0, 1)")
    cfg["rho_schedule"] = rhos
    cap = raw.get("exact_cap")
    if cap is not None and (not isinstance(cap, int) or cap < 1):
        raise ConfigError("exact_cap: must be a positive integer")
    cfg["exact_cap"] = cap
    cfg["mode"] = raw.get("mode", "auto")
    if cfg["mode"] not in ("auto", "exact", "greedy"):
        raise ConfigError("mode: must be auto, exact or greedy")
    comps = raw.get("computations", [])
    if not isinstance(comps, list):
        raise ConfigError("computations: expected a list")
    cfg["computations"] = [_check_computation(i, c) for i, c in enumerate(comps)]
    return cfg


def _check_computation(i: int, comp) -> dict:
    where = f"computations[{i}]"
    if not isinstance(comp, dict) or "type" not in comp:
        raise ConfigError(f"{where}.type: required")
    kind = comp["type"]
    if kind not in COMPUTATION_KEYS:
        raise ConfigError(f"{where}.type: unknown computation {kind!r}")
    unknown = sorted(set(comp) - COMPUTATION_KEYS[kind] - {"type"})
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}: unknown key")
    if "eps" in comp and (not isinstance(comp["eps"], (int, float)) or not comp["eps"] > 0):
        raise ConfigError(f"{where}.eps: must be positive")
    if kind == "entropy" and comp.get("notion") not in ENTROPY_NOTIONS:
        raise ConfigError(f"{where}.notion: must be one of {ENTROPY_NOTIONS}")
    if kind == "vp" and comp.get("theorem") not in THEOREMS:
        raise ConfigError(f"{where}.theorem: must be one of {THEOREMS}")
    if kind == "check" and comp.get("suite") not in checks.SUITES:
        raise ConfigError(f"{where}.suite: must be one of {checks.SUITES}")
    if kind == "partition" and comp.get("kind") not in ("tame", "fiber-adapted"):
        raise ConfigError(f"{where}.kind: must be tame or fiber-adapted")
    if kind == "pressure" and comp.get("kind", "separated") not in ("separated", "spanning",
                                                                     "cover"):
        raise ConfigError(f"{where}.kind: must be separated, spanning or cover")
    if kind == "pressure" and comp.get("scope", "fiber-sup") not in ("fiber-sup", "nu-averaged"):
        raise ConfigError(f"{where}.scope: must be fiber-sup or nu-averaged")
    if kind == "mdim" and "eps_schedule" in comp:
        _positive_list(f"{where}.eps_schedule", comp["eps_schedule"], decreasing=True)
    return dict(comp)


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON of the normalised semantic config."""
    semantic = {k: v for k, v in cfg.items() if k != "output"}
    text = json.dumps(semantic, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# building objects from a config


class Context:
    def __init__(self, cfg: dict, workers: int = 1):
        self.cfg = cfg
        s = cfg["system"]
        if s["kind"] == "full":
            self.sys = build_full_shift(s["k"], s["W"], s["n_max"], s["sample_cap"], s["seed"])
        else:
            self.sys = build_hilbert_shift(s["g"], s["W"], s["n_max"], s["sample_cap"], s["seed"])
        f = cfg["factor"]
        if f["kind"] == "trivial":
            self.factor = trivial_factor(self.sys)
        elif f["kind"] == "identity":
            self.factor = identity_factor(self.sys)
        else:
            self.factor = build_block_factor(self.sys, f["code"])
        self.mu = self._measure(cfg["measure"])
        self.phi = self._potential(cfg["potential"])
        b = cfg["budget"]
        self.budget = Budget(b["grid"], b["iterations"], b["restarts"], cfg["seed"], workers)
        self.cap = cfg["exact_cap"]
        self.mode = cfg["mode"]

    def _measure(self, m) -> Measure:
        k = self.sys.k
        if m["kind"] == "uniform":
            return Measure.uniform(self.sys.size)
        if m["kind"] == "bernoulli":
            p = m["p"] if m["p"] is not None else [1.0 / k] * k
            return product_measure(self.sys, ProductSpec.bernoulli(p))
        if m["matrix"] is None:
            raise ConfigError("measure.matrix: markov measures need a matrix")
        return product_measure(self.sys, ProductSpec.markov(m["matrix"]))

    def _potential(self, p) -> Potential:
        if p["kind"] == "constant":
            return Potential.constant(self.sys.size, float(p["value"]))
        if p["kind"] == "coordinate":
            return self.sys.coordinate_potential(p["values"])
        values = p["values"]
        if not isinstance(values, list) or len(values) != self.sys.size:
            raise ConfigError(f"potential.values: table needs {self.sys.size} values")
        return Potential(np.array(values, dtype=float), "table")

    def family(self) -> MeasureFamily:
        f = self.cfg["family"]
        if f["kind"] == "markov-matrices":
            return MeasureFamily.markov(self.sys)
        nu = None
        if f["constraint"] is not None:
            q = f["constraint"].get("p") if isinstance(f["constraint"], dict) else None
            if q is None:
                raise ConfigError("family.constraint.p: expected codomain symbol weights")
            nu = product_measure(self.factor.codomain, ProductSpec.bernoulli(q))
        return MeasureFamily.bernoulli(self.sys, nu, self.factor if nu is not None else None)


# ---------------------------------------------------------------------------
# computations: each returns a list of (table name, rows, plot rows)


def _eps(comp, ctx):
    return float(comp.get("eps", ctx.cfg["eps_schedule"][0]))


def _do_pressure(comp, ctx):
    kind, eps = comp.get("kind", "separated"), _eps(comp, ctx)
    scaled = ctx.phi.scaled(math.log(1 / eps))
    resolution = adapted_cover(ctx.sys.space, eps) if kind == "cover" else eps
    if comp.get("scope", "fiber-sup") == "nu-averaged":
        from .measures import pushforward
        nu = pushforward(ctx.mu, ctx.factor)
        rep = nu_averaged_report(ctx.sys, ctx.factor, ctx.phi, eps, nu, ctx.cfg["n_schedule"],
                                 kind, resolution if kind == "cover" else None, ctx.mode, ctx.cap)
    else:
        rep = relative_report(ctx.sys, ctx.factor, scaled, resolution, ctx.cfg["n_schedule"],
                              kind, ctx.mode, ctx.cap)
    rows = [dict(r, eps=eps) for r in rep.rows()]
    series = f"pressure:{kind}:{rep.scope}:eps={eps:g}"
    return [("pressure", rows, [(series, n, v / n) for n, v in rep.per_n])]


def _do_entropy(comp, ctx):
    notion, eps = comp["notion"], _eps(comp, ctx)
    ns = ctx.cfg["n_schedule"]
    rhos = [comp["rho"]] if "rho" in comp else ctx.cfg["rho_schedule"]
    kw = {"mode": ctx.mode} if ctx.cap is None else {"mode": ctx.mode, "cap": ctx.cap}
    if notion == "partition":
        reps = [cover_entropy(ctx.sys, ctx.factor, ctx.mu, adapted_cover(ctx.sys.space, eps), ns,
                              seed=ctx.cfg["seed"])]
    elif notion == "shapira":
        U = adapted_cover(ctx.sys.space, eps)
        reps = [shapira_report(ctx.sys, ctx.factor, ctx.mu, U, r, ns, **kw) for r in rhos]
    elif notion == "katok":
        reps = [katok_report(ctx.sys, ctx.factor, ctx.mu, eps, r, ns, **kw) for r in rhos]
    else:
        reps = list(brin_katok_report(ctx.sys, ctx.factor, ctx.mu, eps, ns, comp.get("sample"),
                                      ctx.cfg["seed"]))
    rows, plot = [], []
    for rep in reps:
        rows += rep.rows()
        tag = "" if rep.rho is None else f":rho={rep.rho:g}"
        plot += [(f"entropy:{rep.notion}:{rep.resolution}{tag}", n, v) for n, v in rep.per_n]
    return [("entropy", rows, plot)]


def _do_mdim(comp, ctx):
    sched = comp.get("eps_schedule", ctx.cfg["eps_schedule"])
    est = mdim_estimate(ctx.sys, ctx.factor, ctx.phi, sched, ctx.cfg["n_schedule"], ctx.mode,
                        comp.get("cross_check", True))
    rows = [dict(r, sampled=int(est.sampled)) for r in est.table]
    plot = [("mdim:ratio", r["eps"], r["ratio"]) for r in est.table]
    plot += [("mdim:span_ratio", r["eps"], r["span_ratio"]) for r in est.table if "span_ratio" in r]
    return [("mdim", rows, plot)]


def _do_check(comp, ctx):
    rows = checks.run_suite(comp["suite"], comp.get("instances"), ctx.cfg["seed"])
    plot = [(f"check:{r['suite']}:{r['family']}", i, r["slack"]) for i, r in enumerate(rows)]
    return [("checks", rows, plot)]


def _do_vp(comp, ctx):
    eps = _eps(comp, ctx)
    sched = {"n": ctx.cfg["n_schedule"], "rho": ctx.cfg["rho_schedule"], "eps": eps}
    rep = vp_check(comp["theorem"], ctx.sys, ctx.factor, ctx.phi, eps, ctx.family(), ctx.budget,
                   sched)
    return [("vp", rep.rows(), [(f"vp:{rep.theorem_id}:gap", eps, rep.gap)])]


def _do_remark54(comp, ctx):
    U = adapted_cover(ctx.sys.space, ctx.cfg["eps_schedule"][0])
    fam = MeasureFamily.bernoulli(ctx.factor.codomain) if hasattr(ctx.factor.codomain, "k") \
        else MeasureFamily.finite(ctx.factor.codomain, [Measure.uniform(1)])
    rep = remark54_consistency(ctx.sys, ctx.factor, ctx.phi, U, fam, ctx.budget, comp.get("n"))
    row = {"n": rep.n, "nu_max": rep.nu_max, "argmax_params": " ".join(f"{v:.6f}" for v in
                                                                       rep.argmax),
           "fiber_sup": rep.fiber_sup, "gap": rep.gap, "ok": int(rep.ok)}
    return [("remark54", [row], [("remark54:gap", rep.n, rep.gap)])]


def _do_partition(comp, ctx):
    eps, rho = _eps(comp, ctx), float(comp.get("rho", ctx.cfg["rho_schedule"][0]))
    if comp["kind"] == "tame":
        t = tame_partition(ctx.sys.space, ctx.mu, eps, rho)
        alpha, extra = t.alpha, {"delta": t.delta, "boundary_mass": t.boundary_mass}
    else:
        V = adapted_cover(ctx.sys.space, eps)
        alpha = fiber_adapted_partition(ctx.sys, ctx.factor, ctx.mu, V, rho)
        extra = {"delta": "", "boundary_mass": ""}
    row = {"kind": comp["kind"], "eps": eps, "rho": rho, "blocks": len(alpha), **extra,
           "labels": " ".join(str(int(v)) for v in alpha.labels)}
    return [("partition", [row], [])]


DISPATCH = {"pressure": _do_pressure, "entropy": _do_entropy, "mdim": _do_mdim,
            "check": _do_check, "vp": _do_vp, "remark54": _do_remark54,
            "partition": _do_partition}


# ---------------------------------------------------------------------------
# output


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    fields = list(rows[0])
    for r in rows[1:]:
        fields += [k for k in r if k not in fields]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", restval="")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def run(cfg: dict, out: Path, workers: int = 1) -> int:
    """Execute a normalised config; write CSVs, plot data and a manifest."""
    start = time.perf_counter()
    needs_system = any(c["type"] != "check" for c in cfg["computations"])
    ctx = Context(cfg, workers) if needs_system else argparse.Namespace(cfg=cfg)
    comps = cfg["computations"]
    if workers > 1 and len(comps) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda c: DISPATCH[c["type"]](c, ctx), comps))
    else:
        results = [DISPATCH[c["type"]](c, ctx) for c in comps]
    tables: dict[str, list] = {}
    plot: list = []
    for res in results:
        for name, rows, pts in res:
            tables.setdefault(name, []).extend(rows)
            plot.extend(pts)
    files = {f"{name}.csv": _csv_text(rows) for name, rows in sorted(tables.items()) if rows}
    if plot:
        files["plot.csv"] = _csv_text([{"series": s, "x": x, "y": y} for s, x, y in plot])
    manifest = {"config_sha256": config_hash(cfg), "package_version": __version__,
                "numpy_version": np.__version__, "python_version": platform.python_version(),
                "seed": cfg["seed"], "files": " ".join(sorted(files)),
                "wall_time_seconds": f"{time.perf_counter() - start:.3f}"}
    files["manifest.txt"] = "".join(f"{k}: {v}\n" for k, v in manifest.items())
    _write_all(out, files)
    return EXIT_OK


def _write_all(out: Path, files: dict) -> None:
    created_dir = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for name, text in files.items():
            path = out / name
            path.write_text(text)
            written.append(path)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        if created_dir:
            try:
                out.rmdir()
            except OSError:
                pass
        raise


# ---------------------------------------------------------------------------
# argument parsing


GLOBAL_DEFAULTS = {"seed": None, "out": None, "exact_cap": None, "workers": 1, "config": None,
                   "verbose": False}


def _global_options() -> argparse.ArgumentParser:
    # accepted before or after the subcommand
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the config seed")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output directory (env RELMDIM_OUT)")
    g.add_argument("--exact-cap", type=int, default=argparse.SUPPRESS,
                   help="size cap for exact searches")
    g.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="worker threads")
    g.add_argument("--config", default=argparse.SUPPRESS, help="JSON experiment config")
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    p = argparse.ArgumentParser(prog="relmdim", description=__doc__.splitlines()[0],
                                parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common],
                       help="run every computation listed in a config")
    r.add_argument("config_file", nargs="?", default=None)

    pr = sub.add_parser("pressure", parents=[common], help="relative pressure report")
    pr.add_argument("--kind", choices=("separated", "spanning", "cover"), default="separated")
    pr.add_argument("--eps", type=float, default=None)
    pr.add_argument("--scope", choices=("fiber-sup", "nu-averaged"), default="fiber-sup")

    en = sub.add_parser("entropy", parents=[common], help="conditional entropy report")
    en.add_argument("notion", choices=ENTROPY_NOTIONS)
    en.add_argument("--eps", type=float, default=None)
    en.add_argument("--rho", type=float, default=None)
    en.add_argument("--sample", type=int, default=None)

    md = sub.add_parser("mdim", parents=[common], help="mean dimension table")
    md.add_argument("--eps-schedule", type=float, nargs="+", default=None)

    ch = sub.add_parser("check", parents=[common], help="inequality suites")
    ch.add_argument("suite", choices=checks.SUITES)
    ch.add_argument("--instances", type=int, default=None)

    vp = sub.add_parser("vp", parents=[common], help="variational principle report")
    vp.add_argument("theorem", choices=THEOREMS)
    vp.add_argument("--eps", type=float, default=None)

    sub.add_parser("remark54", parents=[common],
                   help="max over nu of averaged pressure against fiber-sup")

    pa = sub.add_parser("partition", parents=[common], help="tame or fiber-adapted partition")
    pa.add_argument("kind", choices=("tame", "fiber-adapted"))
    pa.add_argument("--eps", type=float, default=None)
    pa.add_argument("--rho", type=float, default=None)
    return p


def _command_computation(args) -> dict:
    c = {"type": args.command}
    if args.command == "pressure":
        c.update(kind=args.kind, scope=args.scope)
    elif args.command == "entropy":
        c.update(notion=args.notion)
        if args.rho is not None:
            c["rho"] = args.rho
        if args.sample is not None:
            c["sample"] = args.sample
    elif args.command == "mdim" and args.eps_schedule:
        c["eps_schedule"] = args.eps_schedule
    elif args.command == "check":
        c["suite"] = args.suite
        if args.instances is not None:
            c["instances"] = args.instances
    elif args.command == "vp":
        c["theorem"] = args.theorem
    elif args.command == "partition":
        c["kind"] = args.kind
        if args.rho is not None:
            c["rho"] = args.rho
    if getattr(args, "eps", None) is not None:
        c["eps"] = args.eps
    return c


def _load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        path = args.config_file if args.command == "run" and args.config_file else args.config
        if args.command == "run" and path is None:
            raise ConfigError("config: run needs a config file")
        raw = _load_config(path) if path else {}
        raw = copy.deepcopy(raw)
        if args.seed is not None:
            raw["seed"] = args.seed
        elif path is None:
            raw.setdefault("seed", 0)
        if args.exact_cap is not None:
            raw["exact_cap"] = args.exact_cap
        if args.command != "run":
            raw["computations"] = [_command_computation(args)]
        out = args.out or os.environ.get("RELMDIM_OUT") or raw.get("output") or "relmdim-out"
        if args.workers < 1:
            raise ConfigError("workers: must be positive")
        cfg = normalize_config(raw)
        if "output" in raw:
            cfg["output"] = raw["output"]
        return run(cfg, Path(out), args.workers)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=_sys.stderr)
        return EXIT_CAPACITY
    except (ConfigError, RelMdimError, ValueError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
