"""Fixed-resolution conditional entropies: partition, Shapira, Katok, Brin-Katok.

All logarithms are natural.  Relative versions integrate over the
disintegration of the measure along a factor's fibers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _solvers
from .covers import Cover, Partition, join_iterate, subordinate_partitions
from .errors import DomainError
from .measures import ConditionalFamily, Measure, disintegrate
from .metric_core import COVER_CAP, MapSystem, RateEstimate
from .systems import FactorMap

RHO_SCHEDULE = (0.4, 0.2, 0.1, 0.05)
NOTIONS = ("partition", "shapira", "katok", "brin-katok-lower", "brin-katok-upper")


@dataclass
class EntropyReport:
    """Per-n normalised values ``(n, value/n)`` plus the rate bracket."""

    notion: str
    per_n: list
    rate: RateEstimate
    relative: bool
    resolution: str
    rho: float | None = None
    exact: bool = True
    extra: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [{"notion": self.notion, "relative": int(self.relative),
                 "eps_or_cover": self.resolution,
                 "rho": "" if self.rho is None else self.rho,
                 "n": n, "value": v, "rate_lower": self.rate.rate_lower,
                 "rate_upper": self.rate.rate_upper} for n, v in self.per_n]


def shannon(p) -> float:
    """``-sum p log p`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def _check_schedule(n_schedule) -> list[int]:
    ns = [int(n) for n in n_schedule]
    if not ns or any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        raise DomainError("n schedule must be a nonempty increasing list of positive integers")
    return ns


def conditional_entropy(mu: Measure, alpha: Partition, family: ConditionalFamily) -> float:
    """``sum_y nu(y) H(mu_y on alpha)``."""
    if alpha.size != mu.size or family.size != mu.size:
        raise DomainError("partition, measure and family live on different spaces")
    lab = alpha.labels
    total = 0.0
    for y, fm in family.per_fiber.items():
        masses = np.bincount(lab[fm.points], weights=fm.weights)
        total += family.base.weights[y] * shannon(masses)
    return total


def _relative(factor: FactorMap) -> bool:
    return factor.codomain.size > 1


def _cached(cache, key, build):
    """Memoise measure-independent structures in a caller-owned dict."""
    if cache is None:
        return build()
    if key not in cache:
        cache[key] = build()
    return cache[key]


def _join(sys, U, n, cache):
    return _cached(cache, ("join", id(U), n), lambda: join_iterate(sys, U, n))


def partition_entropy_rate(sys: MapSystem, factor: FactorMap, mu: Measure, alpha: Partition,
                           n_schedule, family: ConditionalFamily | None = None,
                           cache: dict | None = None) -> EntropyReport:
    """``(1/n) H_mu(alpha_0^{n-1} | Y)`` per n; Fekete infimum as the rate."""
    ns = _check_schedule(n_schedule)
    family = disintegrate(mu, factor) if family is None else family
    samples = [(n, conditional_entropy(mu, _join(sys, alpha, n, cache), family)) for n in ns]
    rate = RateEstimate.from_samples(samples, "fekete-infimum")
    return EntropyReport("partition", [(n, v / n) for n, v in samples], rate,
                         _relative(factor), f"partition[{len(alpha)}]")


def smb_values(sys: MapSystem, factor: FactorMap, mu: Measure, alpha: Partition, n: int,
               family: ConditionalFamily | None = None) -> np.ndarray:
    """Per-point ``-(1/n) log mu_{pi x}(alpha_0^{n-1}(x))`` (nan off the support)."""
    family = disintegrate(mu, factor) if family is None else family
    lab = join_iterate(sys, alpha, n).labels
    out = np.full(mu.size, np.nan)
    for fm in family.per_fiber.values():
        masses = np.bincount(lab[fm.points], weights=fm.weights)
        cell = masses[lab[fm.points]]
        keep = fm.weights > 0
        out[fm.points[keep]] = -np.log(cell[keep]) / n
    return out


def _fiber_log_counts(membership_of, family: ConditionalFamily, rho: float, mode: str, cap: int):
    """nu-average of ``log N`` and of its lower bracket over retained fibers."""
    value = lower = 0.0
    exact = True
    for y, fm in family.per_fiber.items():
        res = _solvers.min_sets_for_mass(membership_of(y, fm.points), fm.weights, 1 - rho,
                                         mode, cap)
        w = family.base.weights[y]
        value += w * math.log(res.count)
        lower += w * math.log(max(res.lower, 1))
        exact &= res.exact
    return value, lower, exact


def _report_from_counts(notion, ns, values, lowers, exact, factor, resolution, rho):
    rate = RateEstimate.from_samples(list(zip(ns, values)), "max-tail", lower=lowers)
    return EntropyReport(notion, [(n, v / n) for n, v in zip(ns, values)], rate,
                         _relative(factor), resolution, rho, exact)


def shapira_report(sys: MapSystem, factor: FactorMap, mu: Measure, U: Cover, rho: float,
                   n_schedule, mode: str = "auto", cap: int = COVER_CAP,
                   cache: dict | None = None) -> EntropyReport:
    """``(1/n) sum_y nu(y) log N_{mu_y}(U_0^{n-1}, rho)`` per n; tail min/max as the rate."""
    if not 0 < rho < 1:
        raise DomainError("rho must lie in (0, 1)")
    ns = _check_schedule(n_schedule)
    family = disintegrate(mu, factor)
    values, lowers, exact = [], [], True
    for n in ns:
        J = _join(sys, U, n, cache)
        v, lo, ex = _fiber_log_counts(lambda y, pts: J.matrix[:, pts], family, rho, mode, cap)
        values.append(v)
        lowers.append(lo)
        exact &= ex
    return _report_from_counts("shapira", ns, values, lowers, exact, factor,
                               f"cover[{len(U)}]", rho)


def katok_counts(sys: MapSystem, n: int, eps: float, family: ConditionalFamily, rho: float,
                 mode: str = "auto", cap: int = COVER_CAP) -> dict:
    """Per fiber, fewest Bowen balls ``B_n(c, eps)`` (c anywhere) holding mass ``>= 1 - rho``."""
    centers = np.arange(sys.size)
    out = {}
    for y, fm in family.per_fiber.items():
        member = sys.bowen_matrix(n, centers, fm.points) < eps
        out[y] = _solvers.min_sets_for_mass(member, fm.weights, 1 - rho, mode, cap)
    return out


def _ball_sets(sys, n, eps, y, pts, cache):
    """Distinct nonempty traces on ``pts`` of Bowen balls with any center."""
    def build():
        member = sys.bowen_matrix(n, np.arange(sys.size), pts) < eps
        return np.unique(member[member.any(axis=1)], axis=0)[::-1]
    return _cached(cache, ("balls", float(eps), n, y, len(pts)), build)


def katok_report(sys: MapSystem, factor: FactorMap, mu: Measure, eps: float, rho: float,
                 n_schedule, mode: str = "auto", cap: int = COVER_CAP,
                 cache: dict | None = None) -> EntropyReport:
    """``(1/n) sum_y nu(y) log N_{mu_y}(n, eps, rho)`` per n.

    Balls are traced on the whole fiber, so counts depend on mu only
    through the fiber weights.
    """
    if not 0 < rho < 1 or not eps > 0:
        raise DomainError("need eps > 0 and 0 < rho < 1")
    ns = _check_schedule(n_schedule)
    family = disintegrate(mu, factor)
    values, lowers, exact = [], [], True
    for n in ns:
        v, lo, ex = _fiber_log_counts(
            lambda y, pts: _ball_sets(sys, n, eps, y, pts, cache),
            family, rho, mode, cap)
        values.append(v)
        lowers.append(lo)
        exact &= ex
    return _report_from_counts("katok", ns, values, lowers, exact, factor, f"eps={eps:g}", rho)


def local_ball_masses(sys: MapSystem, n: int, eps: float, family: ConditionalFamily,
                      points, cache: dict | None = None) -> np.ndarray:
    """``mu_{pi x}(B_n(x, eps))`` for each given point x on the support."""
    owner = {}
    for y, fm in family.per_fiber.items():
        for p in fm.points:
            owner[int(p)] = y
    points = np.asarray(points, dtype=int)
    out = np.empty(len(points))
    by_fiber: dict[int, list[int]] = {}
    for i, x in enumerate(points):
        by_fiber.setdefault(owner[int(x)], []).append(i)
    for y, pos in by_fiber.items():
        fm = family.per_fiber[y]
        inside = _cached(cache, ("ball-mass", float(eps), n, y, points[pos].tobytes(),
                                 fm.points.tobytes()),
                         lambda: sys.bowen_matrix(n, points[pos], fm.points) < eps)
        out[pos] = inside @ fm.weights
    return out


def brin_katok_report(sys: MapSystem, factor: FactorMap, mu: Measure, eps: float, n_schedule,
                      sample: int | None = None, seed: int = 0,
                      cache: dict | None = None) -> tuple[EntropyReport, EntropyReport]:
    """Lower and upper Brin-Katok reports.

    Per point x, ``-(1/n) log mu_{pi x}(B_n(x, eps))`` is computed for every
    n; the lower (upper) value of x is its minimum (maximum) over the tail
    half of the schedule, and these are integrated against mu.  With
    ``sample`` set, x ranges over a seeded mu-distributed sample instead of
    the whole support (equal weights).
    """
    ns = _check_schedule(n_schedule)
    family = disintegrate(mu, factor)
    support = mu.support
    if sample is None:
        points, weights = support, mu.weights[support]
    else:
        rng = np.random.default_rng(seed)
        points = np.sort(rng.choice(mu.size, size=int(sample), p=mu.weights))
        weights = np.full(len(points), 1.0 / len(points))
    per_point = np.empty((len(ns), len(points)))
    for row, n in enumerate(ns):
        per_point[row] = -np.log(local_ball_masses(sys, n, eps, family, points, cache)) / n
    per_point = np.maximum(per_point, 0.0)
    means = per_point @ weights
    tail = per_point[len(ns) // 2:]
    low = float(tail.min(axis=0) @ weights)
    high = float(tail.max(axis=0) @ weights)
    samples = [(n, float(m) * n) for n, m in zip(ns, means)]
    rel = _relative(factor)
    res = f"eps={eps:g}"
    extra = {"sampled": sample is not None}
    lower = EntropyReport("brin-katok-lower", [(n, float(m)) for n, m in zip(ns, means)],
                          RateEstimate(tuple(samples), low, low, "max-tail"), rel, res, extra=extra)
    upper = EntropyReport("brin-katok-upper", [(n, float(m)) for n, m in zip(ns, means)],
                          RateEstimate(tuple(samples), high, high, "max-tail"), rel, res, extra=extra)
    return lower, upper


def cover_entropy(sys: MapSystem, factor: FactorMap, mu: Measure, U: Cover, n_schedule,
                  orderings: int = 24, seed: int = 0, partitions=None) -> EntropyReport:
    """Least partition entropy rate over the subordinate-partition family of U.

    The true infimum ranges over all partitions refining U, so the value is
    an upper bound on it.
    """
    family = disintegrate(mu, factor)
    parts = subordinate_partitions(sys, U, mu, orderings, seed) if partitions is None else partitions
    best = None
    for alpha in parts:
        rep = partition_entropy_rate(sys, factor, mu, alpha, n_schedule, family)
        if best is None or rep.rate.rate_upper < best.rate.rate_upper:
            best = rep
    best.notion = "partition"
    best.resolution = f"cover[{len(U)}]"
    best.extra = {"family_size": len(parts), "upper_bound_on_infimum": True}
    return best
