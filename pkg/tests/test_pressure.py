import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from relmdim import DomainError
from relmdim.covers import Cover, Partition
from relmdim.measures import Measure, ProductSpec, product_measure, pushforward
from relmdim.metric_core import MapSystem, MetricSpace, Potential
from relmdim.pressure import (cover_sum, fiber_report, mdim_estimate, nu_averaged_report,
                              relative_report, separated_bracket, separated_sum, spanning_sum)
from relmdim.systems import (build_block_factor, build_full_shift, identity_factor,
                             trivial_factor)


def five_points():
    return MapSystem(MetricSpace.from_points(np.arange(5, dtype=float)), np.arange(5))


def random_instance(seed, m):
    rng = np.random.default_rng(seed)
    dist = oracles.random_points(rng, m)
    step = rng.integers(0, m, m)
    phi = rng.uniform(-1, 1, m)
    return MapSystem(MetricSpace(dist), step), dist, step, phi, rng


def test_zero_potential_reduces_to_counts():
    sys = five_points()
    zero = Potential(np.zeros(5))
    assert separated_sum(sys, zero, 1, 1.5, mode="exact") == pytest.approx(math.log(3))
    assert spanning_sum(sys, zero, 1, 1.5, mode="exact") == pytest.approx(math.log(2))


def test_single_point_subset_gives_birkhoff_sum():
    sys, dist, step, phi, _ = random_instance(0, 6)
    pot = Potential(phi)
    want = oracles.birkhoff(phi, step, 3, 4)
    assert separated_sum(sys, pot, 3, 0.5, K=[4]) == pytest.approx(want)
    assert spanning_sum(sys, pot, 3, 0.5, K=[4]) == pytest.approx(want)


def test_indicator_potential_on_five_points():
    sys = five_points()
    phi = np.array([0, 0, 1.0, 0, 0])
    pot = Potential(phi)
    assert separated_sum(sys, pot, 1, 1.5, mode="exact") == pytest.approx(
        oracles.separated_log_sum(sys.space.dist, sys.step, phi, 1, 1.5, range(5)))
    assert spanning_sum(sys, pot, 1, 1.5, mode="exact") == pytest.approx(
        oracles.spanning_log_sum(sys.space.dist, sys.step, phi, 1, 1.5, range(5)))


def test_spanning_above_diameter_picks_cheapest_point():
    sys, dist, step, phi, _ = random_instance(1, 6)
    eps = 2 * dist.max() + 1
    want = min(oracles.birkhoff(phi, step, 2, x) for x in range(6))
    assert spanning_sum(sys, Potential(phi), 2, eps) == pytest.approx(want)


@pytest.mark.parametrize("seed", range(10))
def test_exact_sums_match_oracle(seed):
    sys, dist, step, phi, rng = random_instance(seed, int(np.random.default_rng(seed).integers(3, 9)))
    m = sys.size
    n = int(rng.integers(1, 4))
    eps = float(rng.uniform(0.2, 1.5))
    K = sorted(rng.choice(m, int(rng.integers(1, m + 1)), replace=False).tolist())
    pot = Potential(phi)
    assert separated_sum(sys, pot, n, eps, K, mode="exact") == pytest.approx(
        oracles.separated_log_sum(dist, step, phi, n, eps, K))
    assert spanning_sum(sys, pot, n, eps, K, mode="exact") == pytest.approx(
        oracles.spanning_log_sum(dist, step, phi, n, eps, K))


@pytest.mark.parametrize("seed", range(8))
def test_cover_sum_matches_oracle(seed):
    sys, dist, step, phi, rng = random_instance(seed, 7)
    mat = rng.random((3, 7)) < 0.5
    mat[rng.integers(0, 3, 7), np.arange(7)] = True
    U = Cover(mat)
    n = int(rng.integers(1, 3))
    K = sorted(rng.choice(7, 4, replace=False).tolist())
    want = oracles.cover_log_sum([set(b) for b in U.blocks], step, phi, n, K, 7)
    assert cover_sum(sys, Potential(phi), n, U, K, mode="exact") == pytest.approx(want)


def test_cover_sum_examples():
    sys, dist, step, phi, _ = random_instance(2, 6)
    pot = Potential(phi)
    assert cover_sum(sys, pot, 3, Cover.whole(6)) == pytest.approx(
        max(oracles.birkhoff(phi, step, 3, x) for x in range(6)))
    shift = build_full_shift(2, 1, 3)
    alpha = Partition.from_labels(shift.words[:, shift.W])
    assert cover_sum(shift, shift.zero_potential(), 3, alpha) == pytest.approx(math.log(8))


@settings(max_examples=25)
@given(st.integers(0, 2 ** 20), st.integers(3, 14), st.integers(1, 3), st.floats(0.1, 2.0))
def test_greedy_brackets_contain_exact(seed, m, n, eps):
    sys, dist, step, phi, _ = random_instance(seed, m)
    pot = Potential(phi)
    b = separated_bracket(sys, pot, n, eps, mode="greedy")
    exact = separated_sum(sys, pot, n, eps, mode="exact")
    assert b.lower - 1e-9 <= exact <= b.upper + 1e-9


@settings(max_examples=25)
@given(st.integers(0, 2 ** 20), st.integers(3, 10), st.integers(1, 3), st.floats(0.1, 2.0),
       st.floats(0.1, 2.0))
def test_sums_nonincreasing_in_eps(seed, m, n, e1, e2):
    sys, dist, step, phi, _ = random_instance(seed, m)
    pot = Potential(phi)
    lo, hi = sorted((e1, e2))
    assert separated_sum(sys, pot, n, hi, mode="exact") <= separated_sum(sys, pot, n, lo, mode="exact") + 1e-9
    assert spanning_sum(sys, pot, n, hi, mode="exact") <= spanning_sum(sys, pot, n, lo, mode="exact") + 1e-9


@settings(max_examples=25)
@given(st.integers(0, 2 ** 20), st.integers(3, 10), st.floats(0.1, 2.0), st.floats(0.0, 0.5))
def test_separated_rate_lipschitz_in_potential(seed, m, eps, shift):
    sys, dist, step, phi, rng = random_instance(seed, m)
    psi = phi + rng.uniform(-shift, shift, m)
    norm = float(np.abs(phi - psi).max())
    for n in (1, 2, 3):
        a = separated_sum(sys, Potential(phi), n, eps, mode="exact")
        b = separated_sum(sys, Potential(psi), n, eps, mode="exact")
        assert abs(a - b) <= n * norm + 1e-9


def test_relative_report_trivial_cases():
    shift = build_full_shift(2, 1, 3)
    rep = relative_report(shift, identity_factor(shift), shift.zero_potential(), 0.5, [1, 2, 3])
    assert all(v == 0 for _, v in rep.per_n)
    glob = relative_report(shift, trivial_factor(shift), shift.zero_potential(), 0.5, [1, 2, 3])
    const = relative_report(shift, build_block_factor(shift, [0, 0]), shift.zero_potential(),
                            0.5, [1, 2, 3])
    assert [v for _, v in glob.per_n] == pytest.approx([v for _, v in const.per_n])
    assert glob.scope == "global"


def test_three_to_two_fiber_sup_counts():
    shift = build_full_shift(3, 1, 4)
    f = build_block_factor(shift, [0, 0, 1])
    rep = relative_report(shift, f, shift.zero_potential(), 0.2, [1, 2, 3, 4])
    # below every coordinate weight, a depth-n separated set reads n + 2W coordinates
    for n, v in rep.per_n:
        assert v == pytest.approx((n + 2) * math.log(2))
    assert rep.scope == "fiber-sup" and len(rep.argsup) == 4


def test_policies_by_kind():
    shift = build_full_shift(2, 1, 3)
    alpha = Partition.from_labels(shift.words[:, shift.W])
    cov = relative_report(shift, trivial_factor(shift), shift.zero_potential(), alpha, [1, 2, 3],
                          kind="cover")
    assert cov.rate.policy == "fekete-infimum"
    sep = relative_report(shift, trivial_factor(shift), shift.zero_potential(), 0.5, [1, 2, 3])
    assert sep.rate.policy == "max-tail"
    with pytest.raises(DomainError):
        relative_report(shift, trivial_factor(shift), shift.zero_potential(), 0.5, [2, 1])


def test_nu_averaged_examples():
    shift = build_full_shift(3, 1, 3)
    f = build_block_factor(shift, [0, 0, 1])
    zero = shift.zero_potential()
    y = 5
    point = Measure.point_mass(f.codomain.size, y)
    avg = nu_averaged_report(shift, f, zero, 0.2, point, [1, 2, 3])
    per = fiber_report(shift, f, zero, 0.2, y, [1, 2, 3])
    assert [v for _, v in avg.per_n] == pytest.approx([v for _, v in per.per_n])
    ident = identity_factor(shift)
    rep = nu_averaged_report(shift, ident, zero, 0.2, Measure.uniform(shift.size), [1, 2])
    assert all(v == 0 for _, v in rep.per_n)


def test_nu_averaged_matches_direct_fiber_counts():
    shift = build_full_shift(3, 1, 3)
    f = build_block_factor(shift, [0, 0, 1])
    mu = product_measure(shift, ProductSpec.bernoulli([0.5, 0.3, 0.2]))
    nu = pushforward(mu, f)
    rep = nu_averaged_report(shift, f, shift.zero_potential(), 0.2, nu, [1, 2, 3])
    for n, v in rep.per_n:
        # the fiber over y holds 2^(#zeros read at depth n) distinct read words
        reads = shift.W * 2 + n
        want = sum(nu.weights[y] * math.log(2) * int((f.codomain.words[y][:reads] == 0).sum())
                   for y in range(f.codomain.size))
        assert v == pytest.approx(want)


def test_mdim_trivial_and_finite_alphabet():
    static = MapSystem(MetricSpace.from_points([0.0, 1.0, 2.0]), [0, 1, 2])
    est = mdim_estimate(static, identity_factor(static), Potential(np.zeros(3)),
                        [0.5, 0.25, 0.125], [1, 2])
    assert est.upper == 0 and est.lower == 0
    shift = build_full_shift(2, 1, 4)
    est = mdim_estimate(shift, trivial_factor(shift), shift.zero_potential(),
                        [0.9, 0.6, 0.3], [1, 2, 3, 4])
    ratios = [r["ratio"] for r in est.table]
    assert all(r > 0 for r in ratios)
    assert ratios[-1] < ratios[0] * 2
    with pytest.raises(DomainError):
        mdim_estimate(shift, trivial_factor(shift), shift.zero_potential(), [0.5, 0.25], [1])


def test_mdim_cross_check_within_bound_when_no_ties():
    rng = np.random.default_rng(4)
    sys = MapSystem(MetricSpace(oracles.random_points(rng, 10) / 4), rng.integers(0, 10, 10))
    phi = Potential(rng.uniform(-1, 1, 10))
    est = mdim_estimate(sys, trivial_factor(sys), phi, [0.6, 0.4, 0.2], [1, 2, 3], mode="exact")
    for row in est.table:
        assert abs(row["gap"]) <= row["gap_bound"] + 1e-9
