"""Covers, partitions, joins and the constructive partition procedures."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import _solvers
from .errors import ConstructionError, DomainError
from .measures import ConditionalFamily, Measure, disintegrate
from .metric_core import COVER_CAP, MapSystem, MetricSpace, _net
from .systems import FactorMap


class Cover:
    """A finite family of point sets whose union is the whole space.

    Stored as a (blocks x points) boolean matrix.  ``open_flag`` is kept for
    bookkeeping only; on a finite space openness carries no information.
    """

    def __init__(self, matrix, open_flag: bool = True):
        mat = np.array(matrix, dtype=bool)
        if mat.ndim != 2 or mat.shape[0] == 0:
            raise DomainError("a cover needs at least one block")
        mat = mat[mat.any(axis=1)]
        if not mat.any(axis=0).all():
            raise DomainError("blocks do not cover the space")
        mat.setflags(write=False)
        self.matrix = mat
        self.open_flag = open_flag

    @classmethod
    def from_blocks(cls, size: int, blocks, **kw):
        mat = np.zeros((len(blocks), size), dtype=bool)
        for i, b in enumerate(blocks):
            mat[i, np.asarray(list(b), dtype=int)] = True
        return cls(mat, **kw)

    @classmethod
    def whole(cls, size: int):
        return cls(np.ones((1, size), dtype=bool))

    @property
    def size(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def blocks(self) -> list[np.ndarray]:
        return [np.flatnonzero(row) for row in self.matrix]

    def to_text(self) -> str:
        return "".join(f"block {k}: {' '.join(map(str, b))}\n" for k, b in enumerate(self.blocks))

    @classmethod
    def from_text(cls, text: str, size: int):
        blocks = []
        for line in text.splitlines():
            if not line.strip():
                continue
            head, _, body = line.partition(":")
            if not head.strip().startswith("block"):
                raise DomainError(f"malformed block line: {line!r}")
            blocks.append([int(v) for v in body.split()])
        return cls.from_blocks(size, blocks)


class Partition(Cover):
    """A cover by pairwise disjoint nonempty blocks."""

    def __init__(self, matrix, open_flag: bool = False):
        super().__init__(matrix, open_flag)
        if (self.matrix.sum(axis=0) != 1).any():
            raise DomainError("partition blocks must be disjoint")

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.matrix, axis=0)

    @classmethod
    def from_labels(cls, labels):
        labels = np.asarray(labels)
        _, inv = np.unique(labels, return_inverse=True)
        inv = np.asarray(inv).reshape(-1)
        mat = np.zeros((inv.max() + 1, labels.size), dtype=bool)
        mat[inv, np.arange(labels.size)] = True
        return cls(mat)


def disjointify(U: Cover, order=None) -> Partition:
    """``A_i = U_{o_i} minus earlier blocks`` for the given block order."""
    order = range(len(U)) if order is None else order
    taken = np.zeros(U.size, dtype=bool)
    rows = []
    for i in order:
        row = U.matrix[i] & ~taken
        taken |= U.matrix[i]
        if row.any():
            rows.append(row)
    return Partition(np.array(rows))


def join_iterate(sys: MapSystem, U: Cover, n: int) -> Cover:
    """``U_0^{n-1}``: nonempty intersections of ``T^-i U_{k_i}``, i < n.

    Identical sets are kept once.  The result is a Partition when U is.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if isinstance(U, Partition):
        lab = U.labels
        cols = [lab]
        idx = np.arange(U.size)
        for _ in range(1, n):
            idx = sys.step[idx]
            cols.append(lab[idx])
        return Partition.from_labels(_row_ids(np.stack(cols, axis=1)))
    rows = U.matrix
    idx = np.arange(U.size)
    for _ in range(1, n):
        idx = sys.step[idx]
        pulled = U.matrix[:, idx]
        rows = (rows[:, None, :] & pulled[None, :, :]).reshape(-1, U.size)
        rows = np.unique(rows[rows.any(axis=1)], axis=0)[::-1]
    return Cover(rows, U.open_flag)


def _row_ids(table: np.ndarray) -> np.ndarray:
    _, inv = np.unique(table, axis=0, return_inverse=True)
    return np.asarray(inv).reshape(-1)


class CoverStats(NamedTuple):
    diam: float
    leb: float


def cover_stats(space: MetricSpace, U: Cover) -> CoverStats:
    """Diameter and Lebesgue number of a cover.

    The Lebesgue number is the supremum of radii r for which every closed
    r-ball lies in some block: ``min_x max_{B ∋ x} min_{z ∉ B} d(x, z)``.
    It is a realised distance, capped at the diameter when some block is
    the whole space.
    """
    diam = 0.0
    for b in U.blocks:
        if len(b) > 1:
            diam = max(diam, float(space.distances(b, b).max()))
    leb = lebesgue_number(space, U)
    return CoverStats(diam, leb)


def lebesgue_number(space: MetricSpace, U: Cover) -> float:
    if U.matrix.all(axis=1).any():
        return space.diameter
    best = math.inf
    idx = np.arange(U.size)
    for s in range(0, U.size, 256):
        rows = idx[s:s + 256]
        d = space.distances(rows, idx)
        reach = np.full(len(rows), 0.0)
        for blk in U.matrix:
            outside = np.where(blk[None, :], np.inf, d).min(axis=1)
            reach = np.where(blk[rows], np.maximum(reach, outside), reach)
        best = min(best, float(reach.min()))
    return min(best, space.diameter)


def refines(U: Cover, V: Cover) -> bool:
    """True iff every block of U lies inside some block of V."""
    outside = U.matrix.astype(np.int64) @ (~V.matrix).astype(np.int64).T
    return bool((outside == 0).any(axis=1).all())


def adapted_cover(space: MetricSpace, eps: float) -> Cover:
    """Balls of radius eps/2 about a greedy eps/4-net.

    Verified afterwards to have diameter <= eps and Lebesgue number >= eps/4.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    sys = MapSystem(space)
    idx = np.arange(space.size)
    centers = _net(sys, 1, idx, eps / 4, range(space.size))
    d = space.distances(centers, idx)
    U = Cover(np.unique(d < eps / 2, axis=0)[::-1])
    stats = cover_stats(space, U)
    # a whole-space block contains every ball, whatever the capped Lebesgue number says
    whole = bool(U.matrix.all(axis=1).any())
    if stats.diam > eps or (stats.leb < eps / 4 and not whole):
        raise ConstructionError(f"adapted cover failed verification: {stats}")
    return U


def subcover_bracket(U: Cover, nu: Measure, rho: float, mode: str = "auto",
                     cap: int = COVER_CAP) -> _solvers.PartialCover:
    """``N_nu(U, rho)`` with its lower bracket and the chosen blocks."""
    if not 0 < rho < 1:
        raise DomainError("rho must lie in (0, 1)")
    return _solvers.min_sets_for_mass(U.matrix, nu.weights, 1 - rho, mode, cap)


def min_subcover_count(U: Cover, nu: Measure, rho: float, mode: str = "auto",
                       cap: int = COVER_CAP) -> int:
    """Fewest blocks of U whose union has nu-mass at least ``1 - rho``."""
    return subcover_bracket(U, nu, rho, mode, cap).count


def fiber_counts(U: Cover, family: ConditionalFamily, rho: float, mode: str = "auto",
                 cap: int = COVER_CAP) -> dict:
    """``N_{mu_y}(U, rho)`` for every retained fiber y (a PartialCover each)."""
    out = {}
    for y, fm in family.per_fiber.items():
        out[y] = _solvers.min_sets_for_mass(U.matrix[:, fm.points], fm.weights,
                                            1 - rho, mode, cap)
    return out


def fiber_adapted_partition(sysX: MapSystem, factor: FactorMap, mu: Measure, V: Cover,
                            rho: float, mode: str = "exact",
                            cap: int = COVER_CAP) -> Partition:
    """A partition refining V whose per-fiber subcover counts do not exceed V's.

    For each positive-mass fiber take a minimal index set I_y; visit the
    distinct index sets by increasing size (then lexicographically), assign
    each fiber to the first set capturing mass ``>= 1 - rho`` of it, and
    disjointify the selected blocks on the union of assigned fibers.  The
    remaining points are disjointified against V in block order.
    """
    if not 0 < rho < 1:
        raise DomainError("rho must lie in (0, 1)")
    family = disintegrate(mu, factor)
    counts = fiber_counts(V, family, rho, mode, cap)
    index_sets = sorted({tuple(c.chosen) for c in counts.values()}, key=lambda t: (len(t), t))
    assigned = {}
    for y, fm in family.per_fiber.items():
        for i, I in enumerate(index_sets):
            union = V.matrix[list(I)][:, fm.points].any(axis=0)
            if fm.weights[union].sum() >= 1 - rho - _solvers.MASS_SLACK:
                assigned[y] = i
                break
    rows = []
    covered = np.zeros(V.size, dtype=bool)
    pi = factor.point_map
    for i, I in enumerate(index_sets):
        ys = [y for y, j in assigned.items() if j == i]
        if not ys:
            continue
        region = np.isin(pi, ys)
        taken = np.zeros(V.size, dtype=bool)
        for k in I:
            rows.append(region & V.matrix[k] & ~taken)
            taken |= V.matrix[k]
        covered |= region & taken
    rest = ~covered
    taken = np.zeros(V.size, dtype=bool)
    for blk in V.matrix:
        rows.append(rest & blk & ~taken)
        taken |= blk
    rows = [r for r in rows if r.any()]
    return Partition(np.array(rows))


def _boundary_distance(space: MetricSpace, alpha: Partition) -> np.ndarray:
    """``b(x) = min_{z not in alpha(x)} d(x, z)`` (inf for a one-block partition)."""
    lab = alpha.labels
    idx = np.arange(alpha.size)
    out = np.empty(alpha.size)
    for s in range(0, alpha.size, 256):
        rows = idx[s:s + 256]
        d = space.distances(rows, idx)
        same = lab[rows][:, None] == lab[None, :]
        out[rows] = np.where(same, np.inf, d).min(axis=1)
    return out


def boundary_mass(space: MetricSpace, alpha: Partition, mu: Measure, delta: float) -> float:
    """``mu(U_delta(boundary alpha))``: mass of points within delta of another block."""
    return float(mu.weights[_boundary_distance(space, alpha) < delta].sum())


def partition_diameter(space: MetricSpace, alpha: Cover) -> float:
    return cover_stats(space, alpha).diam


class TamePartition(NamedTuple):
    alpha: Partition
    delta: float
    boundary_mass: float


def tame_partition(space: MetricSpace, mu: Measure, eps: float, rho: float) -> TamePartition:
    """Partition into shell-selected balls with a measure-small boundary.

    Balls of radius ``eps/4`` about a greedy net cover the space (N centers).
    With ``k = floor(1/rho) + 1`` each center has ``kN`` radii
    ``eps/4 + j eps/(4kN)`` whose ``delta = eps/(8kN)`` shells are disjoint,
    so some shell has mass ``< rho/N``; its radius is used.  Disjointifying
    the chosen balls gives diameter ``< eps`` and boundary mass ``< rho``,
    both re-measured before returning.
    """
    if not eps > 0 or not 0 < rho < 1:
        raise DomainError("need eps > 0 and 0 < rho < 1")
    if isinstance(space, MapSystem):
        space = space.space
    if mu.size != space.size:
        raise DomainError("measure and space sizes differ")
    idx = np.arange(space.size)
    centers = _net(MapSystem(space), 1, idx, eps / 4, range(space.size))
    N = len(centers)
    k = math.floor(1 / rho) + 1
    shells = k * N
    delta = eps / (8 * shells)
    radii = eps / 4 + np.arange(shells) * (eps / (4 * shells))
    d = space.distances(centers, idx)
    balls = []
    for row in d:
        near = np.abs(row[None, :] - radii[:, None]) < delta
        mass = near.astype(float) @ mu.weights
        j = int(np.argmin(mass))
        if not mass[j] < rho / N:
            raise ConstructionError("no shell with small enough mass")
        balls.append(row < radii[j])
    alpha = disjointify(Cover(np.array(balls)))
    diam = partition_diameter(space, alpha)
    bmass = boundary_mass(space, alpha, mu, delta)
    if not diam <= eps or not bmass < rho:
        raise ConstructionError(f"tame partition failed verification: diam={diam}, mass={bmass}")
    return TamePartition(alpha, delta, bmass)


def admissible_delta(space: MetricSpace, alpha: Partition, mu: Measure, rho: float,
                     cap: float) -> float:
    """Largest delta (at most ``cap``) with ``mu(U_delta(boundary)) < rho``.

    With ``b`` the distance to the nearest other block, this is the least
    ``t`` with ``mu(b <= t) >= rho``.
    """
    b = _boundary_distance(space, alpha)
    order = np.argsort(b, kind="stable")
    cum = np.cumsum(mu.weights[order])
    hit = np.flatnonzero(cum >= rho - _solvers.MASS_SLACK)
    if hit.size == 0 or not np.isfinite(b[order[hit[0]]]):
        return cap
    return min(float(b[order[hit[0]]]), cap)


class VWPRow(NamedTuple):
    eps: float
    delta_lower: float
    ratio: float | None
    capped: bool


def candidate_partitions(space: MetricSpace, mu: Measure, eps: float, rho: float) -> list:
    """Partitions with diameter < eps: the tame one plus disjointified net balls."""
    out = []
    try:
        out.append(tame_partition(space, mu, eps, rho).alpha)
    except ConstructionError:
        pass
    idx = np.arange(space.size)
    for frac in (0.25, 0.35, 0.45):
        r = eps * frac
        centers = _net(MapSystem(space), 1, idx, r, range(space.size))
        alpha = disjointify(Cover(space.distances(centers, idx) < r))
        if partition_diameter(space, alpha) < eps:
            out.append(alpha)
    return out


def vwp_diagnostic(space: MetricSpace, mu_family, eps_schedule, rho: float) -> list[VWPRow]:
    """Per scale, a lower bound on ``inf_mu sup_alpha delta`` and its log ratio.

    delta is capped at ``eps/2``; rows where every measure hit the cap have
    no ratio.
    """
    eps_schedule = [float(e) for e in eps_schedule]
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise DomainError("eps schedule must be strictly decreasing")
    rows = []
    for eps in eps_schedule:
        cap = eps / 2
        per_measure = []
        for mu in mu_family:
            parts = candidate_partitions(space, mu, eps, rho)
            per_measure.append(max((admissible_delta(space, a, mu, rho, cap) for a in parts),
                                   default=0.0))
        delta = min(per_measure)
        capped = all(v >= cap for v in per_measure)
        ratio = None
        if not capped and 0 < delta < 1 and eps < 1:
            ratio = math.log(1 / delta) / math.log(1 / eps)
        rows.append(VWPRow(eps, delta, ratio, capped))
    return rows


def mixing_gap(rho: float, M: int) -> float:
    """``2 sqrt(rho) log(M-1) - 2 sqrt(rho) log(2 sqrt(rho)) - (1 - 2 sqrt(rho)) log(1 - 2 sqrt(rho))``."""
    if not (0 < rho and M >= 2):
        raise DomainError("need rho > 0 and M >= 2")
    s = 2 * math.sqrt(rho)
    if not s < 1:
        raise DomainError("need 2 sqrt(rho) < 1")
    return s * math.log(M - 1) - s * math.log(s) - (1 - s) * math.log1p(-s)


def subordinate_partitions(sys: MapSystem, U: Cover, mu: Measure | None = None,
                           orderings: int = 24, seed: int = 0) -> list[Partition]:
    """Partitions refining U: disjointifications under the identity and
    ``orderings`` seeded random block orders, plus tame partitions at the
    Lebesgue number of U when a measure is given.  Duplicates are dropped.
    """
    rng = np.random.default_rng(seed)
    orders = [list(range(len(U)))]
    orders += [list(rng.permutation(len(U))) for _ in range(orderings)]
    out: list[Partition] = []
    seen = set()

    def add(p: Partition):
        key = tuple(_row_ids(p.matrix.T))
        if key not in seen and refines(p, U):
            seen.add(key)
            out.append(p)

    for o in orders:
        add(disjointify(U, o))
    if mu is not None:
        leb = lebesgue_number(sys.space, U)
        if 0 < leb:
            for rho in (0.4, 0.2, 0.1):
                try:
                    add(tame_partition(sys.space, mu, leb, rho).alpha)
                except ConstructionError:
                    pass
    return out
