"""Probability measures on finite systems and their disintegrations."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .metric_core import MapSystem
from .systems import FactorMap, ShiftModel

log = logging.getLogger(__name__)

STATIONARY_TOL = 1e-12
STATIONARY_MAX_ITER = 200_000


class Measure:
    """Nonnegative point weights, renormalised to total mass 1."""

    def __init__(self, weights):
        w = np.array(weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DomainError("weights must be a nonempty 1-d array")
        if not np.all(np.isfinite(w)) or (w < 0).any():
            raise DomainError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise DomainError("measure has zero total mass")
        w = w / total
        w.setflags(write=False)
        self.weights = w

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def mass(self, subset) -> float:
        subset = np.asarray(subset, dtype=int)
        return float(self.weights[subset].sum()) if subset.size else 0.0

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))

    @classmethod
    def point_mass(cls, size: int, x: int) -> "Measure":
        w = np.zeros(size)
        w[x] = 1.0
        return cls(w)

    @classmethod
    def uniform(cls, size: int) -> "Measure":
        return cls(np.ones(size))

    def to_text(self) -> str:
        return "".join(f"{i} {float(self.weights[i])!r}\n" for i in range(self.size))

    @classmethod
    def from_text(cls, text: str, size: int) -> "Measure":
        w = np.zeros(size)
        for line in text.splitlines():
            if not line.strip():
                continue
            i, v = line.split()
            w[int(i)] = float(v)
        return cls(w)


@dataclass
class FiberMeasure:
    """A conditional measure stored on its fiber: ``weights`` over ``points``."""

    points: np.ndarray
    weights: np.ndarray

    def mass(self, subset_mask: np.ndarray) -> float:
        return float(self.weights[subset_mask[self.points]].sum())


@dataclass
class ConditionalFamily:
    """Disintegration ``{mu_y}`` of a measure over a factor's fibers."""

    base: Measure
    size: int
    per_fiber: dict = field(default_factory=dict)
    dropped: list = field(default_factory=list)

    @property
    def fibers(self) -> list[int]:
        return sorted(self.per_fiber)

    def reconstruct(self, subset) -> float:
        """``sum_y nu(y) mu_y(A)``: equals ``mu(A)`` for the source measure."""
        mask = np.zeros(self.size, dtype=bool)
        mask[np.asarray(subset, dtype=int)] = True
        return sum(self.base.weights[y] * fm.mass(mask) for y, fm in self.per_fiber.items())


@dataclass(frozen=True, eq=False)
class ProductSpec:
    """Bernoulli (``p``) or stationary Markov (``matrix``) word measure."""

    kind: str
    p: np.ndarray | None = None
    matrix: np.ndarray | None = None
    stationary: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "bernoulli":
            p = np.asarray(self.p, dtype=float)
            if p.ndim != 1 or (p < 0).any() or abs(p.sum() - 1) > 1e-9:
                raise DomainError("bernoulli p must be a probability vector")
            object.__setattr__(self, "p", p / p.sum())
        elif self.kind == "markov":
            P = np.asarray(self.matrix, dtype=float)
            if P.ndim != 2 or P.shape[0] != P.shape[1] or (P < 0).any():
                raise DomainError("markov matrix must be square and nonnegative")
            if np.abs(P.sum(axis=1) - 1).max() > 1e-9:
                raise DomainError("markov rows must sum to 1")
            P = P / P.sum(axis=1, keepdims=True)
            pi = stationary_vector(P) if self.stationary is None else np.asarray(self.stationary, float)
            if np.abs(pi @ P - pi).max() > 1e-9:
                raise DomainError("supplied vector is not stationary")
            object.__setattr__(self, "matrix", P)
            object.__setattr__(self, "stationary", pi)
        else:
            raise DomainError(f"unknown product kind {self.kind!r}")

    @classmethod
    def bernoulli(cls, p) -> "ProductSpec":
        return cls("bernoulli", p=p)

    @classmethod
    def markov(cls, matrix, stationary=None) -> "ProductSpec":
        return cls("markov", matrix=matrix, stationary=stationary)

    @property
    def alphabet(self) -> int:
        return len(self.p) if self.kind == "bernoulli" else self.matrix.shape[0]


def stationary_vector(P: np.ndarray) -> np.ndarray:
    """Stationary distribution by iterating the lazy chain ``(I + P) / 2``.

    The lazy chain is aperiodic, so the iteration converges for any
    irreducible ``P``; failure to reach the tolerance raises.
    """
    k = P.shape[0]
    lazy = 0.5 * (np.eye(k) + P)
    pi = np.full(k, 1.0 / k)
    for _ in range(STATIONARY_MAX_ITER):
        nxt = pi @ lazy
        nxt /= nxt.sum()
        if np.abs(nxt - pi).max() < STATIONARY_TOL and np.abs(nxt @ P - nxt).max() < STATIONARY_TOL:
            return nxt
        pi = nxt
    raise DomainError("stationary iteration did not converge")


def product_measure(model: ShiftModel, spec: ProductSpec) -> Measure:
    """Word weights from a product spec over the whole window.

    On sampled models this is the normalised restriction to the sample.
    """
    if spec.alphabet != model.k:
        raise DomainError(f"spec has {spec.alphabet} symbols, model has {model.k}")
    words = model.words
    if spec.kind == "bernoulli":
        w = np.prod(spec.p[words], axis=1)
    else:
        w = spec.stationary[words[:, 0]].copy()
        for p in range(1, words.shape[1]):
            w *= spec.matrix[words[:, p - 1], words[:, p]]
    if w.sum() <= 0:
        raise DomainError("product measure vanishes on every model point")
    return Measure(w)


def pushforward(mu: Measure, factor: FactorMap) -> Measure:
    w = np.bincount(factor.point_map, weights=mu.weights, minlength=factor.codomain.size)
    return Measure(w)


def disintegrate(mu: Measure, factor: FactorMap) -> ConditionalFamily:
    """Conditional measures ``mu_y = mu|fiber / mu(fiber)`` on positive-mass fibers."""
    base = pushforward(mu, factor)
    family = ConditionalFamily(base, mu.size)
    for y in range(factor.codomain.size):
        pts = factor.fibers(y)
        w = mu.weights[pts]
        total = w.sum()
        if total <= 0:
            family.dropped.append(y)
            continue
        family.per_fiber[y] = FiberMeasure(pts, w / total)
    if family.dropped:
        log.debug("dropped %d zero-mass fibers", len(family.dropped))
    return family


BALL_NOTE = ("exact on the finite model; a proxy for the continuum value within "
             "the model's truncation bracket")


def bowen_ball_mass(mu: Measure, sys: MapSystem, x: int, n: int, eps: float):
    """``mu(B_n(x, eps))`` summed over model points, with a caveat note."""
    sys.check_index(x)
    d = sys.bowen_matrix(n, [x], np.arange(sys.size))[0]
    return float(mu.weights[d < eps].sum()), BALL_NOTE


def empirical_measure(sys: MapSystem, x0: int, length: int) -> Measure:
    """Uniform weights on the orbit segment ``x0, ..., T^(length-1) x0``."""
    if length < 1:
        raise DomainError("length must be >= 1")
    sys.check_index(x0)
    counts = np.zeros(sys.size)
    x = int(x0)
    for _ in range(length):
        counts[x] += 1
        x = int(sys.step[x])
    return Measure(counts)
