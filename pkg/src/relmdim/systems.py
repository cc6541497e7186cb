"""Window models of shift spaces and factor maps between finite systems.

A window model keeps coordinates ``-W .. n_max-1+W`` of a two-sided
sequence.  Word position ``p`` holds coordinate ``p - W``.  The metric reads
coordinates ``|i| <= W`` with weights ``2^-|i|``; the neglected tail of the
infinite series is at most ``2^(1-W)``.  The shift drops the first symbol
and repeats the last one ("hold last symbol"), so ``T^j`` reads position
``min(q + j, L - 1)`` at position ``q``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import CapacityError, CommutationError, DomainError, SurjectivityError
from .metric_core import MapSystem, MetricSpace, Potential

FULL_LIMIT = 2 ** 18
# bound on the (rows x cols x positions) temporaries built per distance block
_BLOCK_ELEMS = 2 ** 23


def truncation_bound(W: int) -> float:
    """Certified bound on the distance error from truncating the series."""
    return 2.0 ** (-W + 2)


class WordSpace(MetricSpace):
    """Points are words; the distance is a weighted sum of symbol distances."""

    def __init__(self, words: np.ndarray, symbol_dist: np.ndarray, weights: np.ndarray):
        self.words = np.ascontiguousarray(words, dtype=np.int64)
        self.words.setflags(write=False)
        self.symbol_dist = np.asarray(symbol_dist, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.labels = None

    @property
    def size(self) -> int:
        return self.words.shape[0]

    @property
    def dist(self) -> np.ndarray:
        return self.distances()

    def validate(self) -> None:
        # weighted sums of a metric on symbols are pseudometrics by construction
        pass

    def diff_block(self, rows, cols) -> np.ndarray:
        """Per-position symbol distances, shape (rows, cols, L)."""
        a = self.words[np.asarray(rows, dtype=int)]
        b = self.words[np.asarray(cols, dtype=int)]
        return self.symbol_dist[a[:, None, :], b[None, :, :]]

    def distances(self, rows=None, cols=None) -> np.ndarray:
        rows = np.arange(self.size) if rows is None else np.asarray(rows, dtype=int)
        cols = np.arange(self.size) if cols is None else np.asarray(cols, dtype=int)
        span = len(self.weights)
        out = np.empty((len(rows), len(cols)))
        step = max(1, _BLOCK_ELEMS // max(1, len(cols) * span))
        for s in range(0, len(rows), step):
            d = self.diff_block(rows[s:s + step], cols)[:, :, :span]
            out[s:s + step] = d @ self.weights
        return out


class ShiftModel(MapSystem):
    """Window model of the full shift on ``k`` symbols.

    ``levels`` gives each symbol a value in [0, 1] (coordinate distance
    ``|a - b|``); None means the discrete 0/1 coordinate metric.  When
    ``sampled`` is True the points are a seeded uniform sample of words and
    no step table exists: orbit quantities are computed from the words.
    """

    def __init__(self, k: int, W: int, n_max: int, levels=None,
                 sample_cap: int | None = None, seed: int = 0):
        if k < 1 or W < 0 or n_max < 1:
            raise DomainError("need k >= 1, W >= 0, n_max >= 1")
        self.k, self.W, self.n_max = int(k), int(W), int(n_max)
        self.length = self.n_max + 2 * self.W
        if levels is None:
            symbol_dist = (np.arange(k)[:, None] != np.arange(k)[None, :]).astype(float)
            self.levels = None
        else:
            self.levels = np.asarray(levels, dtype=float)
            if self.levels.shape != (k,):
                raise DomainError("one level per symbol")
            symbol_dist = np.abs(self.levels[:, None] - self.levels[None, :])
        offsets = np.arange(-self.W, self.W + 1)
        weights = 2.0 ** (-np.abs(offsets))

        total = k ** self.length
        if sample_cap is not None and total > sample_cap:
            rng = np.random.default_rng(seed)
            words = rng.integers(0, k, size=(int(sample_cap), self.length))
            words = np.unique(words, axis=0)
            self.sampled = True
            step = None
        else:
            if total > FULL_LIMIT:
                raise CapacityError(
                    f"{total} words exceed the enumeration budget {FULL_LIMIT}; set sample_cap")
            words = _all_words(k, self.length)
            self.sampled = False
            tail = k ** (self.length - 1)
            idx = np.arange(total)
            step = (idx % tail) * k + words[:, -1]
        super().__init__(WordSpace(words, symbol_dist, weights), step)

    @property
    def words(self) -> np.ndarray:
        return self.space.words

    def index_of(self, words) -> np.ndarray:
        """Indices of the given words (full models only)."""
        if self.sampled:
            raise DomainError("sampled models have no word index")
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        powers = self.k ** np.arange(self.length - 1, -1, -1, dtype=np.int64)
        return words @ powers

    def _orbit_weights(self, n: int) -> np.ndarray:
        """Matrix M with ``d(T^j x, T^j y) = (diff @ M)[j]`` under hold-last."""
        span = 2 * self.W + 1
        L = self.length
        M = np.zeros((L, n))
        for j in range(n):
            for q in range(span):
                M[min(q + j, L - 1), j] += self.space.weights[q]
        return M

    def bowen_matrix(self, n: int, rows, cols) -> np.ndarray:
        if n < 1:
            raise DomainError("n must be >= 1")
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        M = self._orbit_weights(n)
        out = np.empty((len(rows), len(cols)))
        step = max(1, _BLOCK_ELEMS // max(1, len(cols) * max(self.length, n)))
        for s in range(0, len(rows), step):
            diff = self.space.diff_block(rows[s:s + step], cols)
            out[s:s + step] = (diff @ M).max(axis=2)
        return out

    def birkhoff(self, phi: Potential, n: int, idx=None) -> np.ndarray:
        if phi.symbols is None:
            if self.sampled:
                raise DomainError("sampled models need a coordinate potential")
            return super().birkhoff(phi, n, idx)
        idx = np.arange(self.size) if idx is None else np.asarray(idx, dtype=int)
        pos = np.minimum(self.W + np.arange(n), self.length - 1)
        return phi.symbols[self.words[idx][:, pos]].sum(axis=1)

    def bowen_classes(self, n: int, idx) -> list[np.ndarray]:
        idx = np.asarray(sorted(set(int(i) for i in idx)), dtype=int)
        # every position read by some T^j, j < n, carries positive weight
        key = self.words[idx][:, :min(n + 2 * self.W, self.length)]
        _, inverse = np.unique(key, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        groups: dict[int, list[int]] = {}
        for pos, g in enumerate(inverse):
            groups.setdefault(int(g), []).append(int(idx[pos]))
        return sorted((np.array(v) for v in groups.values()), key=lambda a: a[0])

    def coordinate_potential(self, symbol_values=None, name: str = "coord") -> Potential:
        """Potential reading the zero coordinate: ``phi(x) = symbol_values[x_0]``.

        Defaults to the symbol level (``a / (k-1)`` for discrete models).
        """
        if symbol_values is None:
            if self.levels is not None:
                symbol_values = self.levels
            else:
                symbol_values = np.arange(self.k) / max(1, self.k - 1)
        sym = np.asarray(symbol_values, dtype=float)
        return Potential(sym[self.words[:, self.W]], name, sym)

    def zero_potential(self) -> Potential:
        return self.coordinate_potential(np.zeros(self.k), "zero")


def _all_words(k: int, length: int) -> np.ndarray:
    idx = np.arange(k ** length, dtype=np.int64)
    powers = k ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % k


def build_full_shift(k: int, W: int, n_max: int, sample_cap: int | None = None,
                     seed: int = 0) -> ShiftModel:
    """Window model of the full ``k``-shift with the discrete coordinate metric."""
    if k < 2 or W < 1:
        raise DomainError("need k >= 2 and W >= 1")
    return ShiftModel(k, W, n_max, None, sample_cap, seed)


def build_hilbert_shift(g: int, W: int, n_max: int, sample_cap: int | None = None,
                        seed: int = 0) -> ShiftModel:
    """Window model of the shift on ``[0,1]^Z`` with ``g`` grid levels."""
    if g < 2 or W < 1:
        raise DomainError("need g >= 2 and W >= 1")
    return ShiftModel(g, W, n_max, np.linspace(0.0, 1.0, g), sample_cap, seed)


def hilbert_resolution(eps: float) -> tuple[int, int]:
    """Smallest ``(W, g)`` with ``2^(2-W) <= eps/4`` and ``1/(g-1) <= eps/4``."""
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    W = max(1, math.ceil(2 - math.log2(eps / 4) - 1e-12))
    g = math.ceil(4 / eps - 1e-12) + 1
    return W, g


def reference_cover_bound(eps: float, log_base: float = 2.0) -> float:
    """``(1 + floor(12/eps)) ** (2 * ceil(log(4/eps)) + 2)`` with the given log base."""
    exponent = 2 * math.ceil(math.log(4 / eps, log_base) - 1e-12) + 2
    return float(1 + math.floor(12 / eps)) ** exponent


def product_cover_bound(model: ShiftModel, eps: float) -> int:
    """Certified upper bound on the open ``eps``-ball covering number of a
    Hilbert window model.

    Products of per-coordinate interval covers are balls' subsets: if each
    coordinate ``i`` is within ``t_i`` grid steps of its center then the
    distance is ``sum 2^-|i| t_i/(g-1)``.  A knapsack over integer units
    picks the ``t_i`` minimising the product of per-coordinate counts.
    """
    if model.levels is None:
        raise DomainError("needs a model with grid levels")
    g, W = model.k, model.W
    # distance unit: 2^-W / (g-1); coordinate i with t steps costs t * 2^(W-|i|)
    budget = eps * (g - 1) * 2 ** W
    limit = math.ceil(budget) - 1 if float(budget).is_integer() else math.floor(budget)
    best = np.zeros(limit + 1)
    for i in range(-W, W + 1):
        unit = 2 ** (W - abs(i))
        new = np.full(limit + 1, math.inf)
        for t in range(g):
            cost = t * unit
            if cost > limit:
                break
            count = math.log(math.ceil(g / (2 * t + 1)))
            new[cost:] = np.minimum(new[cost:], best[:limit + 1 - cost] + count)
        best = new
    return int(round(math.exp(best[limit])))


class FactorMap:
    """A validated semiconjugacy ``pi`` from ``domain`` onto ``codomain``."""

    def __init__(self, domain: MapSystem, codomain: MapSystem, point_map):
        pi = np.array(point_map, dtype=int)
        if pi.shape != (domain.size,):
            raise DomainError("point map must be defined on every domain point")
        if (pi < 0).any() or (pi >= codomain.size).any():
            raise DomainError("point map image out of range")
        # onto a single point every map commutes, so no step table is needed
        if codomain.size > 1:
            if domain.step is None or codomain.step is None:
                raise DomainError("factor maps need step tables on both sides")
            bad = np.flatnonzero(pi[domain.step] != codomain.step[pi])
            if bad.size:
                raise CommutationError(f"pi o T != S o pi at point {int(bad[0])}")
        hit = np.zeros(codomain.size, dtype=bool)
        hit[pi] = True
        if not hit.all():
            raise SurjectivityError(f"codomain point {int(np.flatnonzero(~hit)[0])} has no preimage")
        pi.setflags(write=False)
        self.domain, self.codomain, self.point_map = domain, codomain, pi
        order = np.argsort(pi, kind="stable")
        cuts = np.searchsorted(pi[order], np.arange(1, codomain.size))
        self._fibers = [f for f in np.split(order, cuts)]

    def fibers(self, y: int) -> np.ndarray:
        if not 0 <= int(y) < self.codomain.size:
            raise DomainError(f"invalid codomain point {y}")
        return self._fibers[int(y)]

    @property
    def all_fibers(self) -> list[np.ndarray]:
        return list(self._fibers)


def identity_factor(sys: MapSystem) -> FactorMap:
    return FactorMap(sys, sys, np.arange(sys.size))


def trivial_factor(sys: MapSystem) -> FactorMap:
    """Factor onto the one-point system (every fiber is the whole space)."""
    point = MapSystem(MetricSpace([[0.0]]), [0])
    return FactorMap(sys, point, np.zeros(sys.size, dtype=int))


def build_block_factor(sysX: ShiftModel, code) -> FactorMap:
    """1-block factor code applied coordinatewise.

    Image symbols are relabelled ``0..k'-1`` in increasing order of the
    code values; the codomain is the discrete window model on ``k'``
    symbols with the same ``W`` and ``n_max``.
    """
    code = np.asarray(code, dtype=int)
    if code.shape != (sysX.k,):
        raise DomainError("code must map every domain symbol")
    if sysX.sampled:
        raise DomainError("factor codes need a fully enumerated domain")
    image, relabel = np.unique(code, return_inverse=True)
    relabel = np.asarray(relabel).reshape(-1)
    sysY = ShiftModel(len(image), sysX.W, sysX.n_max)
    pi = sysY.index_of(relabel[sysX.words])
    factor = FactorMap(sysX, sysY, pi)
    factor.code = relabel
    return factor
