"""Fixed-resolution checks of the variational principles.

An objective ``mu -> entropy + integral`` is maximised over a parametric
family of shift-invariant measures by a multistart simplex walk and
compared with the matching pressure-side rate.  At a fixed resolution only
the direction of the inequality is meaningful; the raw gap is reported.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .covers import Partition, adapted_cover, subordinate_partitions
from .entropy import (RHO_SCHEDULE, brin_katok_report, katok_report, partition_entropy_rate,
                      shapira_report)
from .errors import ConstraintError, DomainError
from .measures import Measure, ProductSpec, disintegrate, product_measure, pushforward
from .metric_core import MapSystem, Potential, box_dimension_estimate
from .pressure import fiber_report, nu_averaged_report, relative_report
from .systems import FactorMap, ShiftModel

THEOREMS = ("T3.4", "T3.8", "T3.9", "T4.1", "T4.4", "T4.6", "T5.3", "LW3.2")
TOLERANCE = 0.05
CONSTRAINT_TOL = 1e-9
MIN_STEP = 1e-4
FLAT_RADIUS = 1e-3
GRID_LIMIT = 4096
TIE_TOL = 1e-12


@dataclass(frozen=True)
class Budget:
    grid: int = 10
    iterations: int = 50
    restarts: int = 2
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.grid < 1 or self.iterations < 0 or self.restarts < 0 or self.workers < 1:
            raise DomainError("budget fields must be positive")


class MeasureFamily:
    """Product measures on a shift model indexed by points of simplices.

    ``blocks`` lists the simplex dimensions; a parameter is the
    concatenation of one probability vector per block.  Bernoulli families
    may carry a pushforward constraint ``nu`` under a 1-block code: the
    blocks are then the conditional distributions inside each code class,
    scaled by the class probabilities of ``nu``, so every member satisfies
    the constraint by construction.
    """

    def __init__(self, kind: str, model: MapSystem, measures=None,
                 constraint: Measure | None = None, factor: FactorMap | None = None):
        if kind not in ("bernoulli-simplex", "markov-matrices", "finite-list"):
            raise DomainError(f"unknown family kind {kind!r}")
        self.kind, self.model, self.constraint, self.factor = kind, model, constraint, factor
        self.measures = list(measures) if measures is not None else None
        if kind == "finite-list":
            if not self.measures:
                raise DomainError("finite-list family needs measures")
            if any(m.size != model.size for m in self.measures):
                raise DomainError("listed measures live on a different space")
            self.blocks = []
        elif not isinstance(model, ShiftModel):
            raise DomainError("parametric families need a shift model")
        elif kind == "markov-matrices":
            if constraint is not None:
                raise DomainError("pushforward constraints are supported for bernoulli families")
            self.blocks = [model.k] * model.k
        else:
            self.blocks = [model.k]
        self.classes = None
        if constraint is not None:
            self._setup_constraint()

    @classmethod
    def bernoulli(cls, model, constraint=None, factor=None) -> "MeasureFamily":
        return cls("bernoulli-simplex", model, constraint=constraint, factor=factor)

    @classmethod
    def markov(cls, model) -> "MeasureFamily":
        return cls("markov-matrices", model)

    @classmethod
    def finite(cls, model, measures) -> "MeasureFamily":
        return cls("finite-list", model, measures=measures)

    @property
    def dimension(self) -> int:
        return len(self.measures) if self.kind == "finite-list" else sum(b - 1 for b in self.blocks)

    def _setup_constraint(self):
        factor, nu = self.factor, self.constraint
        code = getattr(factor, "code", None) if factor is not None else None
        if code is None:
            raise DomainError("a constrained family needs a 1-block code factor")
        Y = factor.codomain
        if nu.size != Y.size:
            raise DomainError("constraint must live on the codomain")
        q = np.bincount(Y.words[:, Y.W], weights=nu.weights, minlength=Y.k)
        closest = product_measure(Y, ProductSpec.bernoulli(q / q.sum()))
        if np.abs(closest.weights - nu.weights).max() > CONSTRAINT_TOL:
            raise ConstraintError("no bernoulli member pushes forward to nu; closest achievable "
                                  f"image has symbol weights {np.round(q, 12).tolist()}",
                                  closest=closest)
        self.q = q / q.sum()
        self.classes = [np.flatnonzero(code == c) for c in range(Y.k)]
        self.blocks = [len(c) for c in self.classes]

    def symbol_weights(self, params) -> np.ndarray:
        """Effective parameters: symbol probabilities, or the flattened matrix."""
        params = np.asarray(params, dtype=float)
        if self.classes is None:
            return params
        p = np.zeros(self.model.k)
        start = 0
        for c, members in enumerate(self.classes):
            p[members] = self.q[c] * params[start:start + len(members)]
            start += len(members)
        return p

    def measure(self, params) -> Measure:
        if self.kind == "finite-list":
            return self.measures[int(params[0])]
        if self.kind == "markov-matrices":
            P = np.asarray(params, dtype=float).reshape(self.model.k, self.model.k)
            return product_measure(self.model, ProductSpec.markov(P))
        mu = product_measure(self.model, ProductSpec.bernoulli(self.symbol_weights(params)))
        if self.constraint is not None:
            err = np.abs(pushforward(mu, self.factor).weights - self.constraint.weights).max()
            if err > CONSTRAINT_TOL:
                raise ConstraintError(f"pushforward misses the constraint by {err:.3g}")
        return mu


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _grid(blocks, grid: int) -> list[tuple]:
    while grid > 1 and math.prod(math.comb(grid + b - 1, b - 1) for b in blocks) > GRID_LIMIT:
        grid -= 1
    per_block = [[tuple(c / grid for c in comp) for comp in _compositions(grid, b)]
                 for b in blocks]
    return [sum(choice, ()) for choice in itertools.product(*per_block)]


def _random_point(rng, blocks) -> tuple:
    return sum((tuple(rng.dirichlet(np.ones(b))) for b in blocks), ())


def _moves(x: tuple, blocks, step: float) -> list[tuple]:
    """Transfer ``step`` of mass between two coordinates of one block."""
    out = []
    start = 0
    for b in blocks:
        for i in range(b):
            for j in range(b):
                if i == j or x[start + j] <= 0:
                    continue
                d = min(step, x[start + j])
                y = list(x)
                y[start + i] += d
                y[start + j] = max(x[start + j] - d, 0.0)
                out.append(tuple(y))
        start += b
    return out


class Maximum(NamedTuple):
    argmax: tuple
    value: float
    trace: list
    flatness: float


def maximize(objective, family: MeasureFamily, budget: Budget = Budget()) -> Maximum:
    """Multistart simplex-walk maximisation of ``objective(measure)``.

    A coarse grid over the product of simplices is evaluated; the best
    ``restarts`` grid points and ``restarts`` seeded random points start a
    steepest-ascent walk over pairwise transfer moves whose step halves on
    failure until it drops below 1e-4 or the iteration cap is reached.  The
    trace holds every evaluation sorted by parameter; the value is its
    maximum.  On a plateau of tied values (to 1e-12 relative) the argmax is
    the centroid of the tied grid points (of all tied evaluations if no grid
    point ties) when it ties too, else the tied evaluation nearest it.  ``flatness`` is the
    value minus the best value over transfer moves of size 1e-3 around the
    argmax (negative means the argmax is not a local maximum).  An
    exception from the objective carries the offending ``parameters``.
    """
    memo: dict[tuple, float] = {}

    def key(x):
        return tuple(round(v, 12) for v in x)

    def evaluate(x):
        k = key(x)
        if k not in memo:
            try:
                value = float(objective(family.measure(k)))
            except Exception as exc:
                exc.parameters = k
                raise
            if math.isnan(value):
                raise DomainError(f"objective is nan at parameters {k}")
            memo[k] = value
        return memo[k]

    def evaluate_many(points):
        if budget.workers > 1:
            fresh = list(dict.fromkeys(key(p) for p in points if key(p) not in memo))
            with ThreadPoolExecutor(budget.workers) as pool:
                for k, v in zip(fresh, pool.map(lambda p: float(objective(family.measure(p))),
                                                fresh)):
                    memo[k] = v
        return [evaluate(p) for p in points]

    if family.kind == "finite-list":
        points = [(float(i),) for i in range(len(family.measures))]
        evaluate_many(points)
    else:
        blocks = family.blocks
        points = _grid(blocks, budget.grid)
        values = evaluate_many(points)
        ranked = sorted(range(len(points)), key=lambda i: (-values[i], points[i]))
        rng = np.random.default_rng(budget.seed)
        starts = [points[i] for i in ranked[:budget.restarts]]
        starts += [_random_point(rng, blocks) for _ in range(budget.restarts)]
        for x in starts:
            fx = evaluate(x)
            step = 1.0 / budget.grid
            for _ in range(budget.iterations):
                if step < MIN_STEP:
                    break
                cands = _moves(x, blocks, step)
                vals = evaluate_many(cands)
                best = max(range(len(cands)), key=lambda i: (vals[i], -i), default=None)
                if best is not None and vals[best] > fx + 1e-15:
                    x, fx = cands[best], vals[best]
                else:
                    step /= 2
    value = max(memo.values())
    floor = value - TIE_TOL * max(1.0, abs(value))
    tied = sorted(k for k, v in memo.items() if v >= floor)
    if family.kind == "finite-list":
        argmax = tied[0]
    else:
        # Piecewise-constant objectives have plateaus.  The grid samples the
        # parameter space uniformly, so its tied points give an unbiased
        # plateau centre; walk points cluster around their starts and are
        # used only when no grid point attains the maximum.
        grid_tied = [k for k in map(key, points) if memo[k] >= floor]
        centre = key(np.mean(grid_tied or tied, axis=0).tolist())
        if evaluate(centre) >= floor:
            argmax = centre
        else:
            argmax = min(tied, key=lambda k: (float(np.sum((np.array(k) - centre) ** 2)), k))
        value = max(memo.values())
    trace = sorted(memo.items())
    flatness = 0.0
    if family.kind != "finite-list":
        near = [objective(family.measure(key(y))) for y in _moves(argmax, family.blocks,
                                                                 FLAT_RADIUS)]
        if near:
            flatness = value - max(near)
    return Maximum(argmax, value, trace, float(flatness))


@dataclass
class VPReport:
    theorem_id: str
    eps: float
    sup_value: float
    argmax: tuple
    pressure_value: float
    pressure_lower: float
    pressure_upper: float
    gap: float
    direction_ok: bool
    tolerance: float = TOLERANCE
    flatness: float = 0.0
    extra: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [{"theorem_id": self.theorem_id, "eps": self.eps, "sup_value": self.sup_value,
                 "argmax_params": " ".join(f"{v:.6f}" for v in self.argmax),
                 "pressure_lower": self.pressure_lower, "pressure_upper": self.pressure_upper,
                 "gap": self.gap, "direction_ok": int(self.direction_ok)}]


def _schedules(sys, schedules) -> dict:
    out = {"n": list(range(1, getattr(sys, "n_max", 3) + 1)), "rho": [min(RHO_SCHEDULE)],
           "box_eps": [0.5, 0.25, 0.125], "orderings": 8, "bk_sample": None, "eps": 0.5}
    out.update(schedules or {})
    return out


def _effective(family: MeasureFamily, argmax) -> tuple:
    if family.kind == "finite-list":
        return tuple(argmax)
    return tuple(float(v) for v in family.symbol_weights(argmax))


def _integral(phi: Potential):
    return lambda mu: float(mu.weights @ phi.values)


def _report(tid, eps, best, family, pressure, reverse=False, tol=TOLERANCE, extra=None):
    lo, hi = pressure.rate.rate_lower, pressure.rate.rate_upper
    if reverse:
        gap, ok = best.value - lo, lo <= best.value + tol
    else:
        gap, ok = hi - best.value, best.value <= hi + tol
    return VPReport(tid, eps, best.value, _effective(family, best.argmax), hi, lo, hi, gap, ok,
                    tol, best.flatness, dict(extra or {}))


def vp_check(theorem_id: str, sys: MapSystem, factor: FactorMap, phi: Potential, eps: float,
             family: MeasureFamily, budget: Budget = Budget(), schedules: dict | None = None,
             tolerance: float = TOLERANCE) -> VPReport:
    """Sup side versus pressure side of one principle at resolution eps.

    The sup side maximises ``h(mu) + log(1/eps) int phi dmu`` with the
    entropy notion of the principle: partitions subordinate to an adapted
    cover (least rate over the family), Shapira counts of that cover (least
    normalised value over n), Katok or Brin-Katok counts at eps.  The pressure side is the fiber-sup
    rate (cover sums for the partition and Shapira principles, separated
    sums otherwise) or, for the fixed-nu principles, its nu-average.  For
    T4.4 the inequality runs the other way: the lower pressure rate is
    compared with ``(upper box dimension + 1)`` times the lower
    Brin-Katok rate plus the integral.
    """
    if theorem_id not in THEOREMS:
        raise DomainError(f"unsupported theorem id {theorem_id!r}; expected one of {THEOREMS}")
    if theorem_id == "LW3.2":
        return lw_fiberwise_check(sys, factor, phi, family.constraint, family, budget,
                                  dict(schedules or {}, eps=eps), tolerance)
    if not 0 < eps:
        raise DomainError("eps must be positive")
    sc = _schedules(sys, schedules)
    ns, rho = sc["n"], min(sc["rho"])
    scale = math.log(1 / eps)
    scaled = phi.scaled(scale)
    integral = _integral(scaled)
    cache: dict = {}
    extra = {}
    if theorem_id in ("T3.4", "T3.8", "T5.3"):
        U = adapted_cover(sys.space, eps)
        extra["cover_size"] = len(U)
    if theorem_id in ("T3.4", "T5.3"):
        parts = subordinate_partitions(sys, U, Measure.uniform(sys.size), sc["orderings"],
                                       budget.seed)
        extra["partitions"] = len(parts)

        def objective(mu):
            fam = disintegrate(mu, factor)
            h = min(partition_entropy_rate(sys, factor, mu, a, ns, fam, cache).rate.rate_upper
                    for a in parts)
            return h + integral(mu)
    elif theorem_id == "T3.8":
        # infimum over n, the policy of the cover rate it is compared with
        def objective(mu):
            rep = shapira_report(sys, factor, mu, U, rho, ns, cache=cache)
            return min(v for _, v in rep.per_n) + integral(mu)
    elif theorem_id == "T3.9":
        def objective(mu):
            return katok_report(sys, factor, mu, eps, rho, ns, cache=cache).rate.rate_upper \
                + integral(mu)
    elif theorem_id in ("T4.1", "T4.6"):
        def objective(mu):
            _, up = brin_katok_report(sys, factor, mu, eps, ns, sc["bk_sample"], budget.seed, cache)
            return up.rate.rate_upper + integral(mu)
    else:
        box = box_dimension_estimate(sys.space, sc["box_eps"]).upper
        extra["box_upper"] = box

        def objective(mu):
            low, _ = brin_katok_report(sys, factor, mu, eps, ns, sc["bk_sample"], budget.seed, cache)
            return (box + 1) * low.rate.rate_lower + integral(mu)

    best = maximize(objective, family, budget)
    if theorem_id in ("T3.4", "T3.8"):
        pressure = relative_report(sys, factor, scaled, U, ns, "cover")
    elif theorem_id == "T5.3":
        if family.constraint is None:
            raise DomainError("T5.3 needs a family with a pushforward constraint")
        pressure = nu_averaged_report(sys, factor, phi, eps, family.constraint, ns, "cover", U)
    else:
        pressure = relative_report(sys, factor, scaled, eps, ns, "separated")
    return _report(theorem_id, eps, best, family, pressure, theorem_id == "T4.4", tolerance, extra)


def zero_coordinate_partition(model: ShiftModel) -> Partition:
    """Partition by the symbol at coordinate 0."""
    return Partition.from_labels(model.words[:, model.W])


def lw_fiberwise_check(sys: MapSystem, factor: FactorMap, phi: Potential, nu: Measure,
                       family: MeasureFamily, budget: Budget = Budget(),
                       schedules: dict | None = None, tolerance: float = TOLERANCE) -> VPReport:
    """Fixed-nu principle: max over ``{mu : pi mu = nu}`` of
    ``h_mu(alpha | Y) + int phi dmu`` against the nu-average of the fiber
    separated-pressure rates of phi (unscaled) at ``schedules['eps']``.

    On shift models alpha is the zero-coordinate partition; on other
    systems it is the partition into points.
    """
    if nu is None or nu.size != factor.codomain.size:
        raise DomainError("nu must be a measure on the codomain")
    if family.constraint is None and factor.codomain.size > 1:
        listed = family.measures if family.kind == "finite-list" else None
        if listed is None or any(
                np.abs(pushforward(m, factor).weights - nu.weights).max() > CONSTRAINT_TOL
                for m in listed):
            raise DomainError("the family must carry the pushforward constraint nu")
    sc = _schedules(sys, schedules)
    ns, eps = sc["n"], float(sc["eps"])
    alpha = (zero_coordinate_partition(sys) if isinstance(sys, ShiftModel)
             else Partition.from_labels(np.arange(sys.size)))
    cache: dict = {}
    integral = _integral(phi)

    def objective(mu):
        return partition_entropy_rate(sys, factor, mu, alpha, ns, cache=cache).rate.rate_upper \
            + integral(mu)

    best = maximize(objective, family, budget)
    pressure = nu_averaged_report(sys, factor, phi, eps, nu, ns, "separated", scale=False)
    return _report("LW3.2", eps, best, family, pressure, False, tolerance)


class Remark54Report(NamedTuple):
    n: int
    nu_max: float
    argmax: tuple
    fiber_sup: float
    gap: float
    ok: bool


def remark54_consistency(sys: MapSystem, factor: FactorMap, phi: Potential, U,
                         family_over_nu: MeasureFamily, budget: Budget = Budget(),
                         n: int | None = None, tolerance: float = TOLERANCE) -> Remark54Report:
    """Max over nu of the nu-averaged normalised cover sum at n against
    the fiber-sup one.  Both use phi as given and ``n`` defaults to the
    model's ``n_max``."""
    if family_over_nu.model.size != factor.codomain.size:
        raise DomainError("the family must parametrise codomain measures")
    n = int(n or getattr(sys, "n_max", 1))
    per_fiber = np.array([fiber_report(sys, factor, phi, U, y, [n], "cover").per_n[0][1] / n
                          for y in range(factor.codomain.size)])
    best = maximize(lambda nu: float(nu.weights @ per_fiber), family_over_nu, budget)
    top = float(per_fiber.max())
    gap = top - best.value
    return Remark54Report(n, best.value, _effective(family_over_nu, best.argmax), top, gap,
                          abs(gap) <= tolerance)
