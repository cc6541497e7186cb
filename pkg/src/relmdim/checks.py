"""Seeded inequality suites on random finite systems.

Each suite returns one row per checked inequality with its slack
(right side minus left side); a correct implementation has every slack
``>= -SLACK_TOL``.  Random instances use points in the plane, so distances
are tie-free with probability one and strict and non-strict ball
conventions agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _solvers
from .covers import (Cover, adapted_cover, boundary_mass, cover_stats, fiber_adapted_partition,
                     partition_diameter, tame_partition)
from .entropy import katok_counts
from .measures import Measure, disintegrate
from .metric_core import (MapSystem, MetricSpace, Potential, maximal_separated_set,
                          minimal_spanning_set)
from .pressure import cover_bracket, separated_bracket, spanning_bracket
from .systems import FactorMap

SLACK_TOL = 1e-9
EXACT_COVER_CAP = 64
SUITES = ("lemma22", "lipschitz", "duality", "ordering", "lemma61", "tame", "prop26")


@dataclass
class Instance:
    sys: MapSystem
    factor: FactorMap
    phi: Potential
    mu: Measure
    eps: float
    n_max: int


def random_instance(rng: np.random.Generator, max_points: int = 20, max_n: int = 5,
                    max_fibers: int = 3) -> Instance:
    """A random system with a random factor, potential (norm <= 1) and measure.

    The factor is built first: a random map S on a few points and a
    surjection pi; T then sends each point to a random point of the fiber
    over ``S(pi x)``, so ``pi T = S pi`` by construction.
    """
    m = int(rng.integers(4, max_points + 1))
    ky = int(rng.integers(1, min(max_fibers, m // 2) + 1))
    pi = np.concatenate([np.arange(ky), rng.integers(0, ky, m - ky)])
    rng.shuffle(pi)
    S = rng.integers(0, ky, ky)
    fibers = [np.flatnonzero(pi == y) for y in range(ky)]
    step = np.array([rng.choice(fibers[S[pi[x]]]) for x in range(m)])
    space = MetricSpace.from_points(rng.normal(size=(m, 2)))
    sys = MapSystem(space, step)
    ys = np.arange(ky, dtype=float)
    Y = MapSystem(MetricSpace.from_points(ys[:, None]), S)
    factor = FactorMap(sys, Y, pi)
    phi = Potential(rng.uniform(-1, 1, m), "random")
    mu = Measure(rng.dirichlet(np.ones(m)))
    eps = float(rng.uniform(0.15, 0.7) * space.diameter)
    return Instance(sys, factor, phi, mu, eps, int(rng.integers(1, max_n + 1)))


def _row(suite, instance, n, fiber, family, lhs, rhs):
    return {"suite": suite, "instance": instance, "n": n, "fiber": fiber, "family": family,
            "lhs": float(lhs), "rhs": float(rhs), "slack": float(rhs - lhs)}


def lemma22_suite(instances: int = 200, seed: int = 0, max_points: int = 20,
                  max_n: int = 5) -> list[dict]:
    """The three weighted-sum inequality families, per n and per fiber, in
    log form and exact modes.

    (1) with ``diam U <= eps``: spanning(eps) <= separated(eps) <= cover(U);
    (2) with ``delta = leb U``: cover(U) <= n tau_U + spanning(delta/2)
        <= n tau_U + separated(delta/2);
    (3) separated(eps) <= n delta(eps) + spanning(eps/2), delta(eps) the
        modulus of phi over pairs closer than eps/2.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(instances):
        inst = random_instance(rng, max_points, max_n)
        sys, phi, eps = inst.sys, inst.phi, inst.eps
        U = adapted_cover(sys.space, eps)
        stats = cover_stats(sys.space, U)
        tau = phi.modulus(sys.space, stats.diam)
        mod = phi.modulus(sys.space, eps / 2, strict=True)
        for n in range(1, inst.n_max + 1):
            for y, K in enumerate(inst.factor.all_fibers):
                span = spanning_bracket(sys, phi, n, eps, K, "exact").value
                sep = separated_bracket(sys, phi, n, eps, K, "exact").value
                cov = cover_bracket(sys, phi, n, U, K, "exact", EXACT_COVER_CAP).value
                rows.append(_row("lemma22", i, n, y, "1-span-sep", span, sep))
                rows.append(_row("lemma22", i, n, y, "1-sep-cover", sep, cov))
                span_d = spanning_bracket(sys, phi, n, stats.leb / 2, K, "exact").value
                sep_d = separated_bracket(sys, phi, n, stats.leb / 2, K, "exact").value
                rows.append(_row("lemma22", i, n, y, "2-cover-span", cov, n * tau + span_d))
                rows.append(_row("lemma22", i, n, y, "2-span-sep", span_d, sep_d))
                span_h = spanning_bracket(sys, phi, n, eps / 2, K, "exact").value
                rows.append(_row("lemma22", i, n, y, "3-sep-span", sep, n * mod + span_h))
    return rows


def lipschitz_suite(instances: int = 5, pairs: int = 100, seed: int = 0,
                    max_points: int = 12, max_n: int = 4) -> list[dict]:
    """``|rate(phi) - rate(psi)| <= ||phi - psi||`` for the separated rate
    (max over the tail half of the schedule), per fiber and fiber-sup."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(instances):
        inst = random_instance(rng, max_points, max_n)
        sys, eps = inst.sys, inst.eps
        ns = list(range(1, max(inst.n_max, 2) + 1))
        fibers = inst.factor.all_fibers

        def rates(phi):
            per = []
            for K in fibers:
                vals = [separated_bracket(sys, phi, n, eps, K, "exact").value / n for n in ns]
                per.append(max(vals[len(vals) // 2:]))
            return per

        for p in range(pairs):
            scale = rng.uniform(0, 1)
            phi = Potential(rng.uniform(-1, 1, sys.size) * scale, "phi")
            psi = Potential(np.clip(phi.values + rng.normal(0, rng.uniform(0.01, 0.5), sys.size),
                                    -1, 1), "psi")
            a, b = rates(phi), rates(psi)
            norm = (phi - psi).norm
            for y in range(len(fibers)):
                rows.append(_row("lipschitz", i, p, y, "per-fiber", abs(a[y] - b[y]), norm))
            rows.append(_row("lipschitz", i, p, -1, "fiber-sup", abs(max(a) - max(b)), norm))
    return rows


def duality_suite(instances: int = 200, seed: int = 0, max_points: int = 20,
                  max_n: int = 4, exact_limit: int = 12) -> list[dict]:
    """``sep(2 eps) <= span(eps) <= sep(eps)`` for cardinalities.

    Subsets of at most ``exact_limit`` points use exact maximum separated
    and minimum spanning sets.  Larger ones use greedy sets: a greedy
    2eps-separated set is no larger than a greedy spanning set, and the
    greedy maximal eps-separated set is checked to eps-span the subset,
    which certifies ``min span <= sep(eps)``.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(instances):
        inst = random_instance(rng, max_points, max_n, max_fibers=1)
        sys, eps, n = inst.sys, inst.eps, inst.n_max
        K = np.sort(rng.choice(sys.size, int(rng.integers(2, sys.size + 1)), replace=False))
        mode = "exact" if len(K) <= exact_limit else "greedy"
        sep2 = maximal_separated_set(sys, n, 2 * eps, K, mode)
        span = minimal_spanning_set(sys, n, eps, K, mode)
        sep1 = maximal_separated_set(sys, n, eps, K, mode)
        rows.append(_row("duality", i, n, mode, "sep2-span", len(sep2), len(span)))
        if mode == "exact":
            rows.append(_row("duality", i, n, mode, "span-sep", len(span), len(sep1)))
        d = sys.bowen_matrix(n, sep1, K)
        spans = float((d < eps).any(axis=0).all())
        rows.append(_row("duality", i, n, mode, "sep-spans", 1.0, spans))
    return rows


def ordering_suite(instances: int = 100, seed: int = 0, max_points: int = 16,
                   max_n: int = 3) -> list[dict]:
    """Exact per-fiber counts ``N_K(n, eps, rho) <= N_S(U_0^{n-1}, rho) <=
    N_K(n, eps/4, rho)`` for an adapted cover (diam <= eps, leb >= eps/4)."""
    from .covers import join_iterate
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(instances):
        inst = random_instance(rng, max_points, max_n)
        sys, eps, mu = inst.sys, inst.eps, inst.mu
        rho = float(rng.uniform(0.05, 0.5))
        U = adapted_cover(sys.space, eps)
        family = disintegrate(mu, inst.factor)
        for n in range(1, inst.n_max + 1):
            J = join_iterate(sys, U, n)
            big = katok_counts(sys, n, eps, family, rho, "exact", EXACT_COVER_CAP)
            small = katok_counts(sys, n, eps / 4, family, rho, "exact", EXACT_COVER_CAP)
            for y, fm in family.per_fiber.items():
                shap = _solvers.min_sets_for_mass(J.matrix[:, fm.points], fm.weights, 1 - rho,
                                                  "exact", EXACT_COVER_CAP).count
                rows.append(_row("ordering", i, n, y, "katok-shapira", big[y].count, shap))
                rows.append(_row("ordering", i, n, y, "shapira-katok4", shap, small[y].count))
    return rows


def random_open_cover(rng, space: MetricSpace) -> Cover:
    """Balls of random radii about random centers, topped up to cover."""
    m = space.size
    d = space.distances()
    rows = []
    covered = np.zeros(m, dtype=bool)
    for c in rng.permutation(m)[: int(rng.integers(2, m + 1))]:
        r = rng.uniform(0.1, 0.8) * space.diameter
        rows.append(d[c] < r)
        covered |= rows[-1]
    for x in np.flatnonzero(~covered):
        rows.append(d[x] < 1e-12)
    return Cover(np.array(rows))


def lemma61_suite(instances: int = 50, seed: int = 0, max_points: int = 16) -> list[dict]:
    """Per positive-mass fiber, ``N(beta, rho) <= N(V, rho)`` for the
    fiber-adapted partition beta of a random open cover V."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(instances):
        inst = random_instance(rng, max_points, 1)
        V = random_open_cover(rng, inst.sys.space)
        rho = float(rng.uniform(0.05, 0.6))
        beta = fiber_adapted_partition(inst.sys, inst.factor, inst.mu, V, rho)
        family = disintegrate(inst.mu, inst.factor)
        for y, fm in family.per_fiber.items():
            nb = _solvers.min_sets_for_mass(beta.matrix[:, fm.points], fm.weights, 1 - rho,
                                            "exact", EXACT_COVER_CAP).count
            nv = _solvers.min_sets_for_mass(V.matrix[:, fm.points], fm.weights, 1 - rho,
                                            "exact", EXACT_COVER_CAP).count
            rows.append(_row("lemma61", i, 0, y, "beta-V", nb, nv))
    return rows


def tame_suite(instances: int = 50, seed: int = 0, max_points: int = 30) -> list[dict]:
    """Re-measured diameter and boundary mass of tame partitions (the
    boundary inequality is strict: its slack must be positive)."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(instances):
        inst = random_instance(rng, max_points, 1)
        rho = float(rng.uniform(0.05, 0.6))
        space = inst.sys.space
        t = tame_partition(space, inst.mu, inst.eps, rho)
        rows.append(_row("tame", i, 0, 0, "diam", partition_diameter(space, t.alpha), inst.eps))
        mass = boundary_mass(space, t.alpha, inst.mu, t.delta)
        rows.append(_row("tame", i, 0, 0, "boundary", mass, rho))
    return rows


def prop26_suite(instances: int = 50, seed: int = 0, max_points: int = 16,
                 max_n: int = 4) -> list[dict]:
    """Per n and fiber, with ``s = log(1/eps)``:
    ``separated(s phi, eps) <= spanning(log(2/eps) phi, eps/2)
    + n ||phi|| log 2 + n delta s`` where delta is the modulus of phi over
    pairs closer than eps/2; this links the separated and spanning mean
    dimension ratios."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(instances):
        inst = random_instance(rng, max_points, max_n)
        sys, phi = inst.sys, inst.phi
        eps = float(rng.uniform(0.05, 0.9))
        s = math.log(1 / eps)
        delta = phi.modulus(sys.space, eps / 2, strict=True)
        for n in range(1, inst.n_max + 1):
            for y, K in enumerate(inst.factor.all_fibers):
                lhs = separated_bracket(sys, phi.scaled(s), n, eps, K, "exact").value
                rhs = spanning_bracket(sys, phi.scaled(math.log(2 / eps)), n, eps / 2, K,
                                       "exact").value
                rhs += n * phi.norm * math.log(2) + n * delta * s
                rows.append(_row("prop26", i, n, y, "sep-span", lhs, rhs))
    return rows


def run_suite(name: str, instances: int | None = None, seed: int = 0) -> list[dict]:
    fn = {"lemma22": lemma22_suite, "lipschitz": lipschitz_suite, "duality": duality_suite,
          "ordering": ordering_suite, "lemma61": lemma61_suite, "tame": tame_suite,
          "prop26": prop26_suite}.get(name)
    if fn is None:
        from .errors import DomainError
        raise DomainError(f"unknown suite {name!r}; expected one of {SUITES}")
    return fn(seed=seed) if instances is None else fn(instances=instances, seed=seed)


def violations(rows) -> list[dict]:
    return [r for r in rows if r["slack"] < -SLACK_TOL]
