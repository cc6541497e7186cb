"""Potential-weighted separated, spanning and cover sums, and rates built on them.

Every sum is reported as its natural log.  Greedy evaluations come with
certified log brackets; exact ones have a degenerate bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _solvers
from .covers import Cover, Partition, join_iterate
from .errors import CapacityError, DomainError
from .measures import Measure
from .metric_core import (COVER_CAP, SEPARATED_CAP, MapSystem, Potential, RateEstimate,
                          WeightedPick, _check_eps, _logsumexp, _subset, weighted_separated,
                          weighted_spanning)
from .systems import FactorMap

KINDS = ("separated", "spanning", "cover")
SCOPES = ("global", "fiber-sup", "per-fiber", "nu-averaged")


class LogBracket(NamedTuple):
    value: float
    lower: float
    upper: float
    exact: bool


def _pick(sys, phi, n, eps, K, mode, cap, solver) -> WeightedPick:
    _check_eps(eps)
    if n < 1:
        raise DomainError("n must be >= 1")
    K = _subset(sys, K)
    return solver(sys, n, eps, K, sys.birkhoff(phi, n, K), mode, cap)


def separated_bracket(sys: MapSystem, phi: Potential, n: int, eps: float, K=None,
                      mode: str = "auto", cap: int = SEPARATED_CAP) -> LogBracket:
    p = _pick(sys, phi, n, eps, K, mode, cap, weighted_separated)
    return LogBracket(p.log_value, p.log_lower, p.log_upper, p.exact)


def spanning_bracket(sys: MapSystem, phi: Potential, n: int, eps: float, K=None,
                     mode: str = "auto", cap: int = COVER_CAP) -> LogBracket:
    p = _pick(sys, phi, n, eps, K, mode, cap, weighted_spanning)
    return LogBracket(p.log_value, p.log_lower, p.log_upper, p.exact)


def separated_sum(sys, phi, n, eps, K=None, mode="auto", cap=SEPARATED_CAP) -> float:
    """``log sup_E sum_{x in E} exp(S_n phi(x))`` over (n, eps)-separated E in K."""
    return separated_bracket(sys, phi, n, eps, K, mode, cap).value


def spanning_sum(sys, phi, n, eps, K=None, mode="auto", cap=COVER_CAP) -> float:
    """``log inf_F sum_{x in F} exp(S_n phi(x))`` over (n, eps)-spanning F in K."""
    return spanning_bracket(sys, phi, n, eps, K, mode, cap).value


def cover_bracket(sys: MapSystem, phi: Potential, n: int, U: Cover, K=None,
                  mode: str = "auto", cap: int = COVER_CAP, joined: Cover | None = None,
                  birkhoff: np.ndarray | None = None) -> LogBracket:
    """Cheapest subfamily of ``U_0^{n-1}`` covering K, each block costing
    ``sup_{y in B} exp(S_n phi(y))`` over the whole block."""
    K = _subset(sys, K)
    J = join_iterate(sys, U, n) if joined is None else joined
    S = sys.birkhoff(phi, n) if birkhoff is None else birkhoff
    on_k = J.matrix[:, K]
    keep = np.flatnonzero(on_k.any(axis=1))
    cost = np.array([S[J.matrix[b]].max() for b in keep])
    if isinstance(J, Partition):
        v = _logsumexp(cost)
        return LogBracket(v, v, v, True)
    masks = _solvers.rows_to_masks(on_k[keep])
    # a block whose K-part sits inside a no-dearer block is never needed
    order = sorted(range(len(keep)), key=lambda i: (cost[i], -masks[i].bit_count(), i))
    kept: list[int] = []
    for i in order:
        if not any(masks[i] & ~masks[j] == 0 for j in kept):
            kept.append(i)
    kept.sort()
    sets = [masks[i] for i in kept]
    lw = cost[kept]
    w = list(np.exp(lw - lw.max()))
    universe = (1 << len(K)) - 1
    if mode == "exact" and len(sets) > cap:
        raise CapacityError(f"exact cover sum over cap: {len(sets)} > {cap}")
    if mode == "exact" or (mode == "auto" and len(sets) <= cap):
        v = _logsumexp(lw[_solvers.min_weight_set_cover(universe, sets, w)])
        return LogBracket(v, v, v, True)
    v = _logsumexp(lw[_solvers.greedy_set_cover(universe, sets, w)])
    lower = v - math.log(_solvers.harmonic(max(s.bit_count() for s in sets)))
    return LogBracket(v, lower, v, lower >= v)


def cover_sum(sys, phi, n, U, K=None, mode="auto", cap=COVER_CAP) -> float:
    return cover_bracket(sys, phi, n, U, K, mode, cap).value


@dataclass
class PressureReport:
    kind: str
    scope: str
    per_n: list
    rate: RateEstimate
    eps: float | None = None
    cover: str | None = None
    argsup: list = field(default_factory=list)
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    exact: bool = True
    fiber: int | None = None

    def rows(self) -> list[dict]:
        out = []
        for i, (n, v) in enumerate(self.per_n):
            out.append({"kind": self.kind, "scope": self.scope,
                        "eps": "" if self.eps is None else self.eps, "n": n, "value": v,
                        "rate_lower": self.rate.rate_lower, "rate_upper": self.rate.rate_upper,
                        "argsup_fiber": self.argsup[i] if self.argsup else ""})
        return out


def _check_schedule(n_schedule) -> list[int]:
    ns = [int(n) for n in n_schedule]
    if not ns or ns[0] < 1 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise DomainError("n schedule must be a nonempty increasing list of positive integers")
    return ns


def _policy(kind: str) -> str:
    return "fekete-infimum" if kind == "cover" else "max-tail"


class _Evaluator:
    """Evaluates one kind of sum for a fixed potential on many subsets."""

    def __init__(self, sys, phi, kind, resolution, mode, cap):
        if kind not in KINDS:
            raise DomainError(f"kind must be one of {KINDS}")
        if kind == "cover":
            if not isinstance(resolution, Cover):
                raise DomainError("cover kind needs a Cover")
        else:
            _check_eps(float(resolution))
        self.sys, self.phi, self.kind, self.res, self.mode = sys, phi, kind, resolution, mode
        self.cap = cap if cap is not None else (SEPARATED_CAP if kind == "separated" else COVER_CAP)
        self._n = None

    def at(self, n: int, K) -> LogBracket:
        if self.kind == "cover":
            if self._n != n:
                self._n = n
                self._joined = join_iterate(self.sys, self.res, n)
                self._birk = self.sys.birkhoff(self.phi, n)
            return cover_bracket(self.sys, self.phi, n, self.res, K, self.mode, self.cap,
                                 self._joined, self._birk)
        fn = separated_bracket if self.kind == "separated" else spanning_bracket
        return fn(self.sys, self.phi, n, float(self.res), K, self.mode, self.cap)


def _labels(kind, resolution):
    if kind == "cover":
        return None, f"cover[{len(resolution)}]"
    return float(resolution), None


def fiber_report(sys: MapSystem, factor: FactorMap, phi: Potential, resolution, y: int,
                 n_schedule, kind: str = "separated", mode: str = "auto",
                 cap: int | None = None) -> PressureReport:
    """Per-n sums on the single fiber ``pi^-1 y``."""
    ns = _check_schedule(n_schedule)
    ev = _Evaluator(sys, phi, kind, resolution, mode, cap)
    K = factor.fibers(y)
    res = [ev.at(n, K) for n in ns]
    return _assemble(kind, "per-fiber", ns, res, resolution, fiber=y)


def _assemble(kind, scope, ns, res, resolution, argsup=(), fiber=None):
    rate = RateEstimate.from_samples([(n, r.value) for n, r in zip(ns, res)], _policy(kind),
                                     lower=[r.lower for r in res], upper=[r.upper for r in res])
    eps, cover = _labels(kind, resolution)
    return PressureReport(kind, scope, [(n, r.value) for n, r in zip(ns, res)], rate, eps, cover,
                          list(argsup), [r.lower for r in res], [r.upper for r in res],
                          all(r.exact for r in res), fiber)


def relative_report(sys: MapSystem, factor: FactorMap, phi: Potential, resolution, n_schedule,
                    kind: str = "separated", mode: str = "auto",
                    cap: int | None = None) -> PressureReport:
    """Fiber-sup of the chosen sum over every fiber (zero-mass ones included).

    Ties for the arg-sup go to the lowest fiber index.  Brackets are the
    fiber-sups of the per-fiber brackets.
    """
    ns = _check_schedule(n_schedule)
    ev = _Evaluator(sys, phi, kind, resolution, mode, cap)
    fibers = factor.all_fibers
    res, argsup = [], []
    for n in ns:
        best_y, best = 0, None
        lo = hi = -math.inf
        exact = True
        for y, K in enumerate(fibers):
            r = ev.at(n, K)
            lo, hi = max(lo, r.lower), max(hi, r.upper)
            exact &= r.exact
            if best is None or r.value > best.value:
                best_y, best = y, r
        res.append(LogBracket(best.value, lo, hi, exact))
        argsup.append(best_y)
    scope = "fiber-sup" if factor.codomain.size > 1 else "global"
    return _assemble(kind, scope, ns, res, resolution, argsup)


def nu_averaged_report(sys: MapSystem, factor: FactorMap, phi: Potential, eps: float,
                       nu: Measure, n_schedule, kind: str = "separated", U: Cover | None = None,
                       mode: str = "auto", cap: int | None = None,
                       scale: bool = True) -> PressureReport:
    """``sum_y nu(y) P(d, T, phi log(1/eps), eps, y)`` over fibers with ``nu(y) > 0``.

    With ``scale=False`` the potential is used as given.

    Per-n values and rate brackets are the nu-averages of the per-fiber ones.
    The cover kind uses U as the resolution and ``eps`` only for the scale.
    """
    if nu.size != factor.codomain.size:
        raise DomainError("nu must live on the codomain")
    _check_eps(eps)
    ns = _check_schedule(n_schedule)
    scaled = phi.scaled(math.log(1 / eps)) if scale else phi
    resolution = U if kind == "cover" else eps
    ev = _Evaluator(sys, scaled, kind, resolution, mode, cap)
    per_n = np.zeros(len(ns))
    lows = np.zeros(len(ns))
    highs = np.zeros(len(ns))
    rate_lo = rate_hi = 0.0
    exact = True
    for y in nu.support:
        K = factor.fibers(int(y))
        res = [ev.at(n, K) for n in ns]
        w = nu.weights[y]
        rate = RateEstimate.from_samples([(n, r.value) for n, r in zip(ns, res)], _policy(kind),
                                         lower=[r.lower for r in res], upper=[r.upper for r in res])
        per_n += w * np.array([r.value for r in res])
        lows += w * np.array([r.lower for r in res])
        highs += w * np.array([r.upper for r in res])
        rate_lo += w * rate.rate_lower
        rate_hi += w * rate.rate_upper
        exact &= all(r.exact for r in res)
    rate = RateEstimate(tuple(zip(ns, per_n.tolist())), float(rate_lo), float(rate_hi),
                        _policy(kind))
    e, cover = _labels(kind, resolution)
    return PressureReport(kind, "nu-averaged", list(zip(ns, per_n.tolist())), rate,
                          eps if e is None else e, cover, [], lows.tolist(), highs.tolist(), exact)


@dataclass
class MdimEstimate:
    upper: float
    lower: float
    table: list
    sampled: bool = False


def mdim_estimate(sys: MapSystem, factor: FactorMap, phi: Potential, eps_schedule, n_schedule,
                  mode: str = "auto", cross_check: bool = True) -> MdimEstimate:
    """Finite-scale relative metric mean dimension with potential.

    For each eps, ``S(eps)`` is the max-tail rate of the fiber-sup separated
    sum of ``phi log(1/eps)``, and the ratio is ``S(eps) / log(1/eps)``;
    upper/lower are the max/min ratio over the tail half of the schedule.
    Each table row also carries the spanning-based ratio, their gap, and
    ``(|phi| log 2 + delta(eps) log(2/eps)) / log(1/eps)`` with delta the
    modulus of phi at radius eps/2.  On sampled systems the values only
    bound the model quantities from below.
    """
    eps_schedule = [float(e) for e in eps_schedule]
    if len(eps_schedule) < 3:
        raise DomainError("need at least 3 scales")
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise DomainError("eps schedule must be strictly decreasing")
    if any(not 0 < e < 1 for e in eps_schedule):
        raise DomainError("scales must lie in (0, 1)")
    table = []
    for eps in eps_schedule:
        scale = math.log(1 / eps)
        rep = relative_report(sys, factor, phi.scaled(scale), eps, n_schedule, "separated", mode)
        row = {"eps": eps, "S": rep.rate.rate_upper, "ratio": rep.rate.rate_upper / scale,
               "S_lower": rep.rate.rate_lower, "exact": rep.exact}
        if cross_check:
            span = relative_report(sys, factor, phi.scaled(scale), eps, n_schedule, "spanning", mode)
            row["span_ratio"] = span.rate.rate_upper / scale
            row["gap"] = row["ratio"] - row["span_ratio"]
            delta = phi.modulus(sys.space, eps / 2, strict=True)
            row["gap_bound"] = (phi.norm * math.log(2) + delta * math.log(2 / eps)) / scale
        table.append(row)
    tail = [r["ratio"] for r in table[len(table) // 2:]]
    return MdimEstimate(max(tail), min(tail), table, bool(getattr(sys, "sampled", False)))
