"""Finite metric spaces, Bowen dynamics and packing/spanning/covering counts.

Everything here works on point indices ``0..m-1``.  Strict inequalities are
evaluated exactly (no comparison slack): a set is ``(n, eps)``-separated when
all pairwise Bowen distances are ``> eps``, and the Bowen ball
``B_n(x, eps)`` is the open ball ``d_n(x, .) < eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _solvers
from .errors import CapacityError, DomainError

SEPARATED_CAP = 25
COVER_CAP = 20
TRIANGLE_TOL = 1e-12
# above this many points (after quotienting) the greedy paths stream rows
# instead of materialising a full distance matrix
MATRIX_LIMIT = 3000

MODES = ("exact", "greedy", "auto")


class MetricSpace:
    """Finite (pseudo)metric space with an explicit symmetric distance table.

    Zero off-diagonal distances are allowed so that truncated product
    metrics on window models fit the same type.
    """

    def __init__(self, dist, labels=None, validate: bool = True):
        dist = np.array(dist, dtype=float)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise DomainError("distance table must be square")
        if dist.shape[0] == 0:
            raise DomainError("metric space needs at least one point")
        self._dist = dist
        self._dist.setflags(write=False)
        self.labels = None if labels is None else tuple(labels)
        if validate:
            self.validate()

    @property
    def size(self) -> int:
        return self._dist.shape[0]

    @property
    def dist(self) -> np.ndarray:
        return self._dist

    def distances(self, rows=None, cols=None) -> np.ndarray:
        """Distance block between index arrays ``rows`` and ``cols``."""
        rows = np.arange(self.size) if rows is None else np.asarray(rows, dtype=int)
        cols = np.arange(self.size) if cols is None else np.asarray(cols, dtype=int)
        return self._dist[np.ix_(rows, cols)]

    def validate(self) -> None:
        d = self._dist
        if not np.all(np.isfinite(d)) or (d < 0).any():
            raise DomainError("distances must be finite and nonnegative")
        if (np.diag(d) != 0).any():
            raise DomainError("dist[i][i] must be 0")
        if not np.array_equal(d, d.T):
            raise DomainError("distance table is not symmetric")
        for k in range(self.size):
            if (d > d[:, k, None] + d[None, k, :] + TRIANGLE_TOL).any():
                raise DomainError("triangle inequality violated")

    @property
    def diameter(self) -> float:
        idx = np.arange(self.size)
        return max(float(self.distances(idx[s:s + 512], idx).max())
                   for s in range(0, self.size, 512))

    def realized_distances(self) -> np.ndarray:
        return np.unique(self.distances())

    def to_text(self) -> str:
        m = self.size
        d = self.distances()
        lines = [str(m)]
        lines += [" ".join(repr(float(v)) for v in d[i]) for i in range(m)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MetricSpace":
        return _parse_table(text.splitlines())[0]

    @classmethod
    def from_points(cls, coords, labels=None) -> "MetricSpace":
        """Euclidean distances between rows of ``coords``."""
        pts = np.asarray(coords, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        diff = pts[:, None, :] - pts[None, :, :]
        d = np.sqrt((diff ** 2).sum(axis=-1))
        d = np.maximum(d, d.T)
        return cls(d, labels=labels)


def _parse_table(lines: list[str]):
    lines = [ln.strip() for ln in lines if ln.strip()]
    if not lines:
        raise DomainError("empty metric table")
    try:
        m = int(lines[0])
        rows = [[float(v) for v in lines[1 + i].split()] for i in range(m)]
    except (ValueError, IndexError) as exc:
        raise DomainError(f"malformed metric table: {exc}") from exc
    if any(len(r) != m for r in rows):
        raise DomainError("metric table rows must have m entries")
    return MetricSpace(rows), lines[1 + m:]


@dataclass(frozen=True, eq=False)
class Potential:
    """A real function on the points of a space.

    ``symbols`` optionally records that the value depends only on the zero
    coordinate of a shift word (``values[x] == symbols[x_0]``), which lets
    window models evaluate Birkhoff sums without a step table.
    """

    values: np.ndarray
    name: str = "phi"
    symbols: np.ndarray | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or not np.all(np.isfinite(vals)):
            raise DomainError("potential values must be a finite 1-d array")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.symbols is not None:
            sym = np.array(self.symbols, dtype=float)
            sym.setflags(write=False)
            object.__setattr__(self, "symbols", sym)

    @classmethod
    def constant(cls, size: int, value: float = 0.0, name: str = "const") -> "Potential":
        return cls(np.full(size, float(value)), name)

    @property
    def norm(self) -> float:
        """Sup-norm ``max |values|``."""
        return float(np.abs(self.values).max())

    def scaled(self, factor: float) -> "Potential":
        sym = None if self.symbols is None else self.symbols * factor
        return Potential(self.values * factor, f"{factor:g}*{self.name}", sym)

    def __sub__(self, other: "Potential") -> "Potential":
        sym = None
        if self.symbols is not None and other.symbols is not None:
            sym = self.symbols - other.symbols
        return Potential(self.values - other.values, f"{self.name}-{other.name}", sym)

    def modulus(self, space: MetricSpace, radius: float, strict: bool = False) -> float:
        """``max |phi(x) - phi(y)|`` over pairs with ``d(x, y) <= radius``
        (``< radius`` when ``strict``)."""
        best = 0.0
        idx = np.arange(space.size)
        for start in range(0, space.size, 512):
            rows = idx[start:start + 512]
            d = space.distances(rows, idx)
            close = d < radius if strict else d <= radius
            diff = np.abs(self.values[rows, None] - self.values[None, :])
            if close.any():
                best = max(best, float(diff[close].max()))
        return best


class MapSystem:
    """A metric space with a self-map given as an index table.

    ``step`` may be None for systems that compute orbits another way (see
    the window models in :mod:`relmdim.systems`).
    """

    def __init__(self, space: MetricSpace, step=None):
        self.space = space
        if step is not None:
            step = np.array(step, dtype=int)
            if step.shape != (space.size,):
                raise DomainError("step must map every point")
            if (step < 0).any() or (step >= space.size).any():
                raise DomainError("step image out of range")
            step.setflags(write=False)
        self.step = step

    @property
    def size(self) -> int:
        return self.space.size

    def check_index(self, *idx) -> None:
        for i in idx:
            if not (0 <= int(i) < self.size):
                raise DomainError(f"invalid point index {i}")

    def orbit_indices(self, idx, j: int) -> np.ndarray:
        idx = np.asarray(idx, dtype=int)
        if self.step is None:
            raise DomainError("this system has no step table")
        for _ in range(j):
            idx = self.step[idx]
        return idx

    def bowen_matrix(self, n: int, rows, cols) -> np.ndarray:
        """``d_n`` between every index in ``rows`` and every index in ``cols``."""
        if n < 1:
            raise DomainError("n must be >= 1")
        r = np.asarray(rows, dtype=int)
        c = np.asarray(cols, dtype=int)
        out = self.space.distances(r, c)
        for _ in range(1, n):
            r = self.step[r]
            c = self.step[c]
            np.maximum(out, self.space.distances(r, c), out=out)
        return out

    def birkhoff(self, phi: Potential, n: int, idx=None) -> np.ndarray:
        """``S_n phi`` at the given indices (all points by default)."""
        idx = np.arange(self.size) if idx is None else np.asarray(idx, dtype=int)
        total = np.zeros(len(idx))
        cur = idx
        for j in range(n):
            total += phi.values[cur]
            if j + 1 < n:
                cur = self.step[cur]
        return total

    def bowen_classes(self, n: int, idx) -> list[np.ndarray]:
        """Group ``idx`` into classes of zero ``d_n`` distance.

        Classes are ordered by their smallest member; members are sorted.
        """
        idx = np.asarray(sorted(set(int(i) for i in idx)), dtype=int)
        if len(idx) > MATRIX_LIMIT:
            return [np.array([i]) for i in idx]
        d = self.bowen_matrix(n, idx, idx)
        assigned = np.zeros(len(idx), dtype=bool)
        out = []
        for a in range(len(idx)):
            if assigned[a]:
                continue
            members = np.flatnonzero((d[a] == 0) & ~assigned)
            assigned[members] = True
            out.append(idx[members])
        return out

    def to_text(self) -> str:
        if self.step is None:
            raise DomainError("system without a step table cannot be serialised")
        return self.space.to_text() + " ".join(str(int(s)) for s in self.step) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MapSystem":
        space, rest = _parse_table(text.splitlines())
        if not rest:
            raise DomainError("missing step line")
        try:
            step = [int(v) for v in rest[0].split()]
        except ValueError as exc:
            raise DomainError(f"malformed step line: {exc}") from exc
        return cls(space, step)


# ---------------------------------------------------------------------------
# rate bookkeeping

POLICIES = ("last-sample", "fekete-infimum", "max-tail")


def _tail(samples):
    return samples[len(samples) // 2:]


@dataclass(frozen=True)
class RateEstimate:
    """Finite-n stand-in for a limit ``lim value_n / n``.

    ``samples`` are ``(n, value)`` pairs with ``value`` the log-quantity at
    depth ``n``.  ``last-sample`` reads the last ratio; ``fekete-infimum``
    takes the minimum ratio (an upper bracket on the limit of a subadditive
    sequence, reported as a degenerate bracket); ``max-tail`` brackets by
    min/max of the ratios over the tail half of the schedule.
    """

    samples: tuple
    rate_lower: float
    rate_upper: float
    policy: str

    @classmethod
    def from_samples(cls, samples, policy: str, lower=None, upper=None) -> "RateEstimate":
        """Build an estimate; ``lower``/``upper`` optionally hold per-n
        bracket values aligned with ``samples``."""
        if policy not in POLICIES:
            raise DomainError(f"unknown rate policy {policy!r}")
        samples = tuple((int(n), float(v)) for n, v in samples)
        if not samples:
            raise DomainError("no samples")
        lo = samples if lower is None else tuple(zip((n for n, _ in samples), lower))
        hi = samples if upper is None else tuple(zip((n for n, _ in samples), upper))
        ratio = lambda seq: [v / n for n, v in seq]
        if policy == "last-sample":
            rl, ru = lo[-1][1] / lo[-1][0], hi[-1][1] / hi[-1][0]
        elif policy == "fekete-infimum":
            ru = min(ratio(hi))
            rl = min(min(ratio(lo)), ru)
        else:
            rl = min(ratio(_tail(lo)))
            ru = max(ratio(_tail(hi)))
        if rl > ru:
            rl = ru
        return cls(samples, float(rl), float(ru), policy)

    @property
    def ratios(self) -> list[tuple[int, float]]:
        return [(n, v / n) for n, v in self.samples]


# ---------------------------------------------------------------------------
# helpers shared with the pressure module


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}")


def _subset(sys: MapSystem, K) -> np.ndarray:
    if K is None:
        return np.arange(sys.size)
    K = np.asarray(sorted(set(int(k) for k in K)), dtype=int)
    if K.size == 0:
        raise DomainError("K must be nonempty")
    sys.check_index(K.min(), K.max())
    return K


def _check_eps(eps: float) -> None:
    if not eps > 0:
        raise DomainError("eps must be positive")


def _use_exact(mode: str, size: int, cap: int, what: str) -> bool:
    if mode == "exact":
        if size > cap:
            raise CapacityError(f"exact {what} over cap: {size} > {cap}")
        return True
    return mode == "auto" and size <= cap


def _logsumexp(values: Iterable[float]) -> float:
    vals = np.asarray(list(values), dtype=float)
    if vals.size == 0:
        return -math.inf
    top = vals.max()
    return float(top + np.log(np.exp(vals - top).sum()))


class WeightedPick(NamedTuple):
    """A chosen point set with the log of its weight and a log bracket."""

    points: list[int]
    log_value: float
    log_lower: float
    log_upper: float
    exact: bool


def _representatives(sys, n, K, logw, prefer_max: bool):
    classes = sys.bowen_classes(n, K)
    reps = []
    for cls_ in classes:
        w = logw[np.searchsorted(K, cls_)]
        pos = int(np.argmax(w)) if prefer_max else int(np.argmin(w))
        reps.append(int(cls_[pos]))
    return np.array(reps, dtype=int)


def _net(sys, n, reps, radius, order):
    """Streaming net: visit ``order`` and keep a point unless some kept
    point is within ``d_n < radius``.  Returns kept indices into ``reps``."""
    kept: list[int] = []
    covered = np.zeros(len(reps), dtype=bool)
    for a in order:
        if covered[a]:
            continue
        kept.append(int(a))
        row = sys.bowen_matrix(n, reps[[a]], reps)[0]
        covered |= row < radius
    return kept


def weighted_separated(sys: MapSystem, n: int, eps: float, K, logw: np.ndarray,
                       mode: str = "auto", cap: int = SEPARATED_CAP) -> WeightedPick:
    """Maximise ``sum exp(logw)`` over ``(n, eps)``-separated subsets of K.

    ``logw`` is indexed like the sorted subset K.  Greedy mode reports a
    certified upper bracket from an ``eps/2``-spanning set: each of its
    balls holds at most one point of a separated set.
    """
    _check_mode(mode)
    reps = _representatives(sys, n, K, logw, prefer_max=True)
    lw = logw[np.searchsorted(K, reps)]
    exact = _use_exact(mode, len(reps), cap, "separated set")
    order = sorted(range(len(reps)), key=lambda a: (-lw[a], reps[a]))
    if len(reps) <= MATRIX_LIMIT:
        d = sys.bowen_matrix(n, reps, reps)
        conflict = d <= eps
        if exact:
            pick = _solvers.max_weight_independent(conflict, np.exp(lw - lw.max()))
        else:
            pick = _solvers.greedy_independent(conflict, np.exp(lw - lw.max()))
    else:
        pick = sorted(_net(sys, n, reps, np.nextafter(eps, math.inf), order))
        d = None
    value = _logsumexp(lw[pick])
    if exact:
        return WeightedPick(sorted(int(reps[a]) for a in pick), value, value, value, True)
    # upper bracket: greedy eps/2 net spans reps; charge each ball its heaviest point
    centers = _net(sys, n, reps, eps / 2, order)
    tops = []
    for c in centers:
        row = d[c] if d is not None else sys.bowen_matrix(n, reps[[c]], reps)[0]
        tops.append(lw[row < eps / 2].max())
    upper = max(_logsumexp(tops), value)
    return WeightedPick(sorted(int(reps[a]) for a in pick), value, value, upper,
                        bool(upper <= value))


def weighted_spanning(sys: MapSystem, n: int, eps: float, K, logw: np.ndarray,
                      mode: str = "auto", cap: int = COVER_CAP) -> WeightedPick:
    """Minimise ``sum exp(logw)`` over ``(n, eps)``-spanning subsets F of K.

    Greedy mode returns the Chvatal greedy cover as the value and a lower
    bracket from the harmonic bound and a ``2 eps``-packing.
    """
    _check_mode(mode)
    reps = _representatives(sys, n, K, logw, prefer_max=False)
    lw = logw[np.searchsorted(K, reps)]
    exact = _use_exact(mode, len(reps), cap, "spanning set")
    shift = float(lw.max())
    w = np.exp(lw - shift)
    if len(reps) > MATRIX_LIMIT:
        order = sorted(range(len(reps)), key=lambda a: (lw[a], reps[a]))
        pick = _net(sys, n, reps, eps, order)
        value = _logsumexp(lw[pick])
        pack = _net(sys, n, reps, np.nextafter(2 * eps, math.inf), order)
        lower = _logsumexp([lw[sys.bowen_matrix(n, reps[[e]], reps)[0] < eps].min()
                            for e in pack])
        return WeightedPick(sorted(int(reps[a]) for a in pick), value, min(lower, value),
                            value, False)
    d = sys.bowen_matrix(n, reps, reps)
    balls = _solvers.rows_to_masks(d < eps)
    universe = (1 << len(reps)) - 1
    if exact:
        pick = _solvers.min_weight_set_cover(universe, balls, list(w))
        value = _logsumexp(lw[pick])
        return WeightedPick(sorted(int(reps[a]) for a in pick), value, value, value, True)
    pick = _solvers.greedy_set_cover(universe, balls, list(w))
    value = _logsumexp(lw[pick])
    biggest = max(b.bit_count() for b in balls)
    chvatal = value - math.log(_solvers.harmonic(biggest))
    pack = _solvers.greedy_independent(d <= 2 * eps, np.ones(len(reps)))
    packing = _logsumexp([lw[d[e] < eps].min() for e in pack])
    lower = min(max(chvatal, packing), value)
    return WeightedPick(sorted(int(reps[a]) for a in pick), value, lower, value,
                        bool(lower >= value))


# ---------------------------------------------------------------------------
# public operations


def bowen_distance(sys: MapSystem, n: int, x: int, y: int) -> float:
    """``d_n(x, y) = max_{0 <= j < n} d(T^j x, T^j y)``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    sys.check_index(x, y)
    return float(sys.bowen_matrix(n, [x], [y])[0, 0])


def maximal_separated_set(sys: MapSystem, n: int, eps: float, K=None,
                          mode: str = "greedy", cap: int = SEPARATED_CAP) -> list[int]:
    """A maximal ``(n, eps)``-separated subset of K.

    ``greedy`` scans points by increasing index; ``exact`` returns a
    maximum-cardinality one (branch-and-bound, at most ``cap`` points after
    merging points at Bowen distance zero).
    """
    _check_eps(eps)
    K = _subset(sys, K)
    return weighted_separated(sys, n, eps, K, np.zeros(len(K)), mode, cap).points


def minimal_spanning_set(sys: MapSystem, n: int, eps: float, K=None,
                         mode: str = "greedy", cap: int = COVER_CAP) -> list[int]:
    """An ``(n, eps)``-spanning subset of K (open Bowen balls).

    ``greedy`` is largest-uncovered-first set cover; ``exact`` is optimal.
    """
    _check_eps(eps)
    K = _subset(sys, K)
    return weighted_spanning(sys, n, eps, K, np.zeros(len(K)), mode, cap).points


class CountBracket(NamedTuple):
    value: int
    lower: int
    upper: int
    exact: bool


def covering_bracket(space: MetricSpace, eps: float, mode: str = "auto",
                     cap: int = COVER_CAP) -> CountBracket:
    """Number of open ``eps``-balls (centred at points) needed to cover the space.

    The greedy value is an upper bound; the lower bound is the size of a
    greedy ``2 eps``-packing (one packing point per ball at most).
    """
    _check_eps(eps)
    _check_mode(mode)
    sys = MapSystem(space)
    idx = np.arange(space.size)
    exact = _use_exact(mode, space.size, cap, "cover")
    if space.size <= MATRIX_LIMIT:
        d = space.distances()
        balls = _solvers.rows_to_masks(d < eps)
        universe = (1 << space.size) - 1
        if exact:
            k = len(_solvers.min_weight_set_cover(universe, balls, [1.0] * len(balls)))
            return CountBracket(k, k, k, True)
        upper = len(_solvers.greedy_set_cover(universe, balls, [1.0] * len(balls)))
        lower = len(_solvers.greedy_independent(d < 2 * eps, np.ones(space.size)))
    else:
        upper = len(_net(sys, 1, idx, eps, range(space.size)))
        lower = len(_net(sys, 1, idx, 2 * eps, range(space.size)))
    lower = min(lower, upper)
    return CountBracket(upper, lower, upper, lower == upper)


def covering_number(space: MetricSpace, eps: float, mode: str = "auto",
                    cap: int = COVER_CAP) -> int:
    return covering_bracket(space, eps, mode, cap).value


@dataclass(frozen=True)
class BoxDimension:
    lower: float
    upper: float
    per_eps: list = field(default_factory=list)


def box_dimension_estimate(space: MetricSpace, eps_schedule: Sequence[float],
                           mode: str = "auto") -> BoxDimension:
    """Finite-scale box dimension: ``log N(X, eps) / log(1/eps)`` per scale.

    ``lower``/``upper`` are the min/max over the tail half of the schedule.
    ``per_eps`` rows are ``(eps, N, ratio)``.
    """
    eps_schedule = [float(e) for e in eps_schedule]
    if len(eps_schedule) < 3:
        raise DomainError("need at least 3 scales")
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise DomainError("eps schedule must be strictly decreasing")
    if any(e <= 0 or e >= 1 for e in eps_schedule):
        raise DomainError("scales must lie in (0, 1)")
    rows = []
    for eps in eps_schedule:
        count = covering_number(space, eps, mode)
        rows.append((eps, count, math.log(count) / math.log(1 / eps)))
    tail = [r[2] for r in _tail(rows)]
    return BoxDimension(min(tail), max(tail), rows)
