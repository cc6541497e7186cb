"""Exact and greedy combinatorial solvers on bitmask-encoded instances.

Sets are Python ints used as bitsets over a universe ``0..u-1``.  The exact
solvers are branch-and-bound searches meant for the desk-scale instances the
rest of the package hands them; callers enforce the size caps.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CapacityError

MASS_SLACK = 1e-12


def rows_to_masks(matrix: np.ndarray) -> list[int]:
    """Encode each row of a boolean matrix as an int bitset."""
    matrix = np.asarray(matrix, dtype=bool)
    if matrix.ndim != 2:
        raise ValueError("expected a 2-d boolean matrix")
    if matrix.shape[1] == 0:
        return [0] * matrix.shape[0]
    packed = np.packbits(matrix, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


def mask_members(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def _lowest_bit(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


# ---------------------------------------------------------------------------
# maximum-weight independent set (separated sets)


def greedy_independent(conflict: np.ndarray, weights: Sequence[float]) -> list[int]:
    """Heaviest-first greedy independent set; ties go to the lowest index.

    ``conflict[i, j]`` is True when i and j may not both be chosen.  The
    result is maximal: every rejected vertex conflicts with a chosen one.
    """
    k = len(weights)
    order = sorted(range(k), key=lambda i: (-weights[i], i))
    blocked = np.zeros(k, dtype=bool)
    chosen = []
    for v in order:
        if not blocked[v]:
            chosen.append(v)
            blocked |= conflict[v]
            blocked[v] = True
    return sorted(chosen)


def max_weight_independent(conflict: np.ndarray, weights: Sequence[float]) -> list[int]:
    """Exact maximum-weight independent set by branch-and-bound.

    The bound is a greedy clique partition of the conflict graph: an
    independent set takes at most one vertex per clique.
    """
    k = len(weights)
    if k == 0:
        return []
    order = sorted(range(k), key=lambda i: (-weights[i], i))
    w = [float(weights[order[i]]) for i in range(k)]
    conf = np.asarray(conflict, dtype=bool)[np.ix_(order, order)]
    adj = rows_to_masks(conf | np.eye(k, dtype=bool))

    def clique_bound(cands: int) -> float:
        cliques: list[int] = []
        total = 0.0
        for v in mask_members(cands):
            for ci, c in enumerate(cliques):
                if c & ~adj[v] == 0:
                    cliques[ci] = c | (1 << v)
                    break
            else:
                cliques.append(1 << v)
                total += w[v]
        return total

    start = greedy_independent(conf, w)
    best_w = sum(w[i] for i in start)
    best_set = sum(1 << i for i in start)

    def expand(cands: int, cur: float, chosen: int) -> None:
        nonlocal best_w, best_set
        if cands == 0:
            if cur > best_w:
                best_w, best_set = cur, chosen
            return
        if cur + clique_bound(cands) <= best_w:
            return
        v = _lowest_bit(cands)
        expand(cands & ~adj[v], cur + w[v], chosen | (1 << v))
        expand(cands & ~(1 << v), cur, chosen)

    expand((1 << k) - 1, 0.0, 0)
    return sorted(order[i] for i in mask_members(best_set))


# ---------------------------------------------------------------------------
# weighted set cover (spanning sets, cover sums, covering numbers)


def greedy_set_cover(universe: int, sets: Sequence[int], costs: Sequence[float]) -> list[int]:
    """Chvatal greedy: minimise cost per newly covered element.

    With unit costs this is largest-uncovered-first.  Ties go to the lowest
    set index.
    """
    uncovered = universe
    chosen = []
    while uncovered:
        best = None
        best_ratio = math.inf
        for i, s in enumerate(sets):
            gain = (s & uncovered).bit_count()
            if gain == 0:
                continue
            ratio = costs[i] / gain
            if ratio < best_ratio:
                best, best_ratio = i, ratio
        if best is None:
            raise ValueError("sets do not cover the universe")
        chosen.append(best)
        uncovered &= ~sets[best]
    return sorted(chosen)


def harmonic(d: int) -> float:
    return sum(1.0 / i for i in range(1, d + 1))


def min_weight_set_cover(universe: int, sets: Sequence[int], costs: Sequence[float]) -> list[int]:
    """Exact minimum-cost set cover by branch-and-bound.

    Branches on the uncovered element contained in the fewest sets.
    """
    if universe == 0:
        return []
    cand = [i for i, s in enumerate(sets) if s & universe]
    elems = mask_members(universe)
    containing = {e: sorted((i for i in cand if sets[i] >> e & 1), key=lambda i: (costs[i], i))
                  for e in elems}
    if any(not v for v in containing.values()):
        raise ValueError("sets do not cover the universe")
    min_cost = {e: costs[containing[e][0]] for e in elems}

    start = greedy_set_cover(universe, sets, costs)
    best_cost = sum(costs[i] for i in start)
    best = list(start)

    def rec(uncovered: int, cost: float, chosen: list[int]) -> None:
        nonlocal best_cost, best
        if uncovered == 0:
            if cost < best_cost:
                best_cost, best = cost, list(chosen)
            return
        members = mask_members(uncovered)
        if cost + max(min_cost[e] for e in members) >= best_cost:
            return
        e = min(members, key=lambda x: (len(containing[x]), x))
        for i in containing[e]:
            if cost + costs[i] >= best_cost:
                continue
            chosen.append(i)
            rec(uncovered & ~sets[i], cost + costs[i], chosen)
            chosen.pop()

    rec(universe, 0.0, [])
    return sorted(best)


# ---------------------------------------------------------------------------
# partial cover: fewest sets capturing a prescribed mass


class PartialCover(NamedTuple):
    count: int
    lower: int
    chosen: list[int]
    exact: bool


def _dominated(sub: np.ndarray, order: np.ndarray) -> np.ndarray:
    """Mask over ``order``: True for sets strictly inside another set and for
    repeated copies of an identical set after the first."""
    A = sub[order].astype(np.float32)
    # outside[i, j] = |S_i minus S_j|
    outside = A @ (1.0 - A).T
    inside = outside < 0.5
    np.fill_diagonal(inside, False)
    same = inside & inside.T
    strict = inside & ~same
    earlier_copy = np.tril(same, k=-1).any(axis=1)
    drop = strict.any(axis=1) | earlier_copy
    return drop


def min_sets_for_mass(membership: np.ndarray, mass: np.ndarray, need: float,
                      mode: str = "auto", cap: int = 20) -> PartialCover:
    """Fewest rows of ``membership`` whose union has ``mass`` at least ``need``.

    ``membership`` is a (sets x points) boolean matrix.  Only points of
    positive mass matter.  Disjoint families are solved exactly by sorting.
    Otherwise duplicate and dominated sets are dropped and, if at most
    ``cap`` sets remain (``auto``) or ``mode == "exact"``, branch-and-bound
    runs; else greedy (largest marginal mass) with a top-k relaxation lower
    bound.  Comparisons use an absolute slack of ``MASS_SLACK``.
    """
    mass = np.asarray(mass, dtype=float)
    support = np.flatnonzero(mass > 0)
    sub = np.asarray(membership, dtype=bool)[:, support]
    pm = mass[support]
    target = need - MASS_SLACK
    if target <= 0:
        return PartialCover(0, 0, [], True)
    set_mass = sub.astype(float) @ pm
    keep = np.flatnonzero(set_mass > 0)
    if keep.size == 0:
        raise ValueError("no set carries positive mass")
    order = keep[np.lexsort((keep, -set_mass[keep]))]
    csum = np.cumsum(set_mass[order])
    hit = np.flatnonzero(csum >= target)
    if hit.size == 0:
        raise ValueError("sets cannot capture the required mass")
    lower = int(hit[0]) + 1

    if bool((sub[order].sum(axis=0) <= 1).all()):
        return PartialCover(lower, lower, sorted(int(i) for i in order[:lower]), True)

    order = order[~_dominated(sub, order)]
    kept = sub[order]
    km = set_mass[order]

    # greedy by marginal mass; ties go to the heavier (earlier) set
    covered = np.zeros(len(pm), dtype=bool)
    chosen: list[int] = []
    got = 0.0
    while got < target:
        gains = kept[:, ~covered].astype(float) @ pm[~covered]
        best = int(np.argmax(gains))
        chosen.append(best)
        covered |= kept[best]
        got = float(pm[covered].sum())
    greedy = PartialCover(len(chosen), lower, sorted(int(order[j]) for j in chosen), False)
    if mode == "exact" and len(order) > cap:
        raise CapacityError(f"exact partial cover over cap: {len(order)} > {cap}")
    exact = mode == "exact" or (mode == "auto" and len(order) <= cap)
    if not exact:
        if greedy.count == lower:
            return greedy._replace(exact=True)
        return greedy

    n_sets = len(order)
    found: list[int] | None = None

    def dfs(start: int, depth: int, k: int, cov: np.ndarray, picked: list[int]) -> bool:
        nonlocal found
        cur = float(pm[cov].sum())
        if cur >= target:
            found = list(picked)
            return True
        if depth == k:
            return False
        room = k - depth
        for j in range(start, n_sets - room + 1):
            # sets are in nonincreasing mass order: the next `room` masses bound the gain
            if cur + km[j:j + room].sum() < target:
                return False
            if not (kept[j] & ~cov).any():
                continue
            picked.append(j)
            if dfs(j + 1, depth + 1, k, cov | kept[j], picked):
                return True
            picked.pop()
        return False

    for k in range(lower, greedy.count):
        if dfs(0, 0, k, np.zeros(len(pm), dtype=bool), []):
            return PartialCover(k, k, sorted(int(order[j]) for j in found), True)
    return PartialCover(greedy.count, greedy.count, greedy.chosen, True)
