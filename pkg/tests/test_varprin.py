import math

import numpy as np
import pytest

from relmdim import ConstraintError, DomainError
from relmdim.entropy import shannon
from relmdim.measures import Measure, ProductSpec, product_measure, pushforward
from relmdim.metric_core import MapSystem, MetricSpace, Potential
from relmdim.systems import (FactorMap, build_block_factor, build_full_shift, identity_factor,
                             trivial_factor)
from relmdim.varprin import (Budget, MeasureFamily, lw_fiberwise_check, maximize,
                             remark54_consistency, vp_check)

SMALL = Budget(grid=6, iterations=10, restarts=1, seed=0)


def test_budget_validation():
    with pytest.raises(DomainError):
        Budget(grid=0)


def test_constant_objective():
    shift = build_full_shift(2, 1, 1)
    best = maximize(lambda mu: 1.5, MeasureFamily.bernoulli(shift), SMALL)
    assert best.value == 1.5 and len(best.argmax) == 2


def test_binary_shannon_maximised_at_uniform():
    shift = build_full_shift(2, 1, 1)
    fam = MeasureFamily.bernoulli(shift)

    def objective(mu):
        return shannon([mu.mass(np.flatnonzero(shift.words[:, 1] == s)) for s in (0, 1)])

    best = maximize(objective, fam, Budget(grid=7, iterations=60, restarts=2))
    assert best.argmax == pytest.approx((0.5, 0.5), abs=1e-3)
    assert best.value == pytest.approx(math.log(2), abs=1e-3)
    assert best.flatness >= 0
    assert best.trace == sorted(best.trace)


def test_conditional_objective_matches_dense_grid():
    shift = build_full_shift(3, 1, 1)
    fam = MeasureFamily.bernoulli(shift)

    def h(p):
        return shannon(p) - shannon([p[0] + p[1], p[2]])

    def objective(mu):
        return h([mu.mass(np.flatnonzero(shift.words[:, 1] == s)) for s in range(3)])

    best = maximize(objective, fam, Budget(grid=8, iterations=80, restarts=2))
    # dense 1e-4 scan of the symmetric slice p0 = p1 = t/2, p2 = 1 - t
    ts = np.arange(1, 10_000) / 10_000
    scan = [h([t / 2, t / 2, 1 - t]) for t in ts]
    assert best.value == pytest.approx(max(scan), abs=1e-3)
    assert best.argmax[2] == pytest.approx(1 - ts[int(np.argmax(scan))], abs=2e-3)


def test_more_restarts_never_lower_the_max():
    shift = build_full_shift(3, 1, 1)
    fam = MeasureFamily.bernoulli(shift)
    rng = np.random.default_rng(0)
    c = rng.normal(size=shift.size)

    def objective(mu):
        return float(mu.weights @ c) + shannon(mu.weights)

    vals = [maximize(objective, fam, Budget(grid=4, iterations=5, restarts=r)).value
            for r in (1, 2, 4)]
    assert vals[0] <= vals[1] + 1e-12 <= vals[2] + 2e-12


def test_errors_carry_parameters():
    shift = build_full_shift(2, 1, 1)

    def objective(mu):
        raise ValueError("boom")

    with pytest.raises(ValueError) as info:
        maximize(objective, MeasureFamily.bernoulli(shift), SMALL)
    assert hasattr(info.value, "parameters")


def test_finite_family_and_markov_family():
    shift = build_full_shift(2, 1, 1)
    ms = [Measure.point_mass(shift.size, i) for i in range(3)]
    best = maximize(lambda mu: float(mu.weights[1]), MeasureFamily.finite(shift, ms), SMALL)
    assert best.argmax == (1.0,) and best.value == 1.0
    fam = MeasureFamily.markov(shift)
    assert fam.dimension == 2
    mu = fam.measure((0.5, 0.5, 0.5, 0.5))
    assert np.allclose(mu.weights, 1 / 8)


def code_setup(n_max=2):
    shift = build_full_shift(3, 1, n_max)
    f = build_block_factor(shift, [0, 0, 1])
    nu = product_measure(f.codomain, ProductSpec.bernoulli([0.8, 0.2]))
    return shift, f, nu


def test_constrained_family_is_exact_by_construction():
    shift, f, nu = code_setup(1)
    fam = MeasureFamily.bernoulli(shift, constraint=nu, factor=f)
    assert fam.blocks == [2, 1]
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.dirichlet([1, 1])
        mu = fam.measure(tuple(a) + (1.0,))
        assert np.abs(pushforward(mu, f).weights - nu.weights).max() <= 1e-9


def test_infeasible_constraint_reports_closest():
    shift, f, _ = code_setup(1)
    w = np.random.default_rng(1).dirichlet(np.ones(f.codomain.size))
    with pytest.raises(ConstraintError) as info:
        MeasureFamily.bernoulli(shift, constraint=Measure(w), factor=f)
    assert info.value.closest is not None


def test_lw_constrained_argmax_and_value():
    shift, f, nu = code_setup(2)
    fam = MeasureFamily.bernoulli(shift, constraint=nu, factor=f)
    rep = lw_fiberwise_check(shift, f, shift.zero_potential(), nu, fam,
                             Budget(grid=10, iterations=50, restarts=2))
    want = shannon([0.4, 0.4, 0.2]) - shannon([0.8, 0.2])
    assert rep.argmax == pytest.approx((0.4, 0.4, 0.2), abs=1e-3)
    assert rep.sup_value == pytest.approx(want, abs=1e-3)
    assert rep.direction_ok


def test_lw_identity_factor_constant_potential():
    shift = build_full_shift(2, 1, 2)
    ident = identity_factor(shift)
    phi = Potential(np.full(shift.size, 0.3))
    mu = product_measure(shift, ProductSpec.bernoulli([0.5, 0.5]))
    fam = MeasureFamily.finite(shift, [mu])
    rep = lw_fiberwise_check(shift, ident, phi, mu, fam, SMALL)
    assert rep.sup_value == pytest.approx(0.3)
    assert rep.pressure_value == pytest.approx(0.3)


def test_one_point_system_both_sides_zero():
    pt = MapSystem(MetricSpace([[0.0]]), [0])
    fam = MeasureFamily.finite(pt, [Measure([1.0])])
    for tid in ("T3.4", "T3.8", "T3.9", "T4.1"):
        rep = vp_check(tid, pt, trivial_factor(pt), Potential(np.zeros(1)), 0.5, fam, SMALL,
                       {"n": [1, 2]})
        assert rep.sup_value == pytest.approx(0) and rep.pressure_value == pytest.approx(0)
        assert rep.gap == pytest.approx(0) and rep.direction_ok


def test_identity_factor_relative_principles_vanish():
    shift = build_full_shift(2, 1, 2)
    fam = MeasureFamily.bernoulli(shift)
    for tid in ("T3.9", "T4.1"):
        rep = vp_check(tid, shift, identity_factor(shift), shift.zero_potential(), 0.5, fam, SMALL)
        assert rep.sup_value == pytest.approx(0, abs=1e-12)
        assert rep.pressure_value == pytest.approx(0, abs=1e-12)


def test_katok_principle_on_binary_shift_near_uniform():
    shift = build_full_shift(2, 1, 6)
    fam = MeasureFamily.bernoulli(shift)
    rep = vp_check("T3.9", shift, trivial_factor(shift), shift.zero_potential(), 0.9, fam,
                   Budget(grid=10, iterations=20, restarts=1))
    assert rep.direction_ok and rep.gap >= -0.05
    assert rep.argmax == pytest.approx((0.5, 0.5), abs=1e-2)


def test_katok_side_below_brin_katok_side():
    shift = build_full_shift(2, 1, 4)
    fam = MeasureFamily.bernoulli(shift)
    phi = shift.coordinate_potential()
    k = vp_check("T3.9", shift, trivial_factor(shift), phi, 0.5, fam, SMALL)
    bk = vp_check("T4.1", shift, trivial_factor(shift), phi, 0.5, fam, SMALL)
    assert k.sup_value <= bk.sup_value + 0.05


def test_reversed_and_averaged_principles_run():
    shift, f, nu = code_setup(2)
    fam = MeasureFamily.bernoulli(shift, constraint=nu, factor=f)
    rep = vp_check("T5.3", shift, f, shift.zero_potential(), 0.5, fam, SMALL)
    assert rep.direction_ok
    rep = vp_check("T4.4", shift, trivial_factor(shift), shift.zero_potential(), 0.5,
                   MeasureFamily.bernoulli(shift), SMALL)
    assert rep.theorem_id == "T4.4" and "box_upper" in rep.extra
    with pytest.raises(DomainError):
        vp_check("T9.9", shift, f, shift.zero_potential(), 0.5, fam, SMALL)


def test_vp_report_is_deterministic():
    shift = build_full_shift(2, 1, 3)
    fam = MeasureFamily.bernoulli(shift)
    a = vp_check("T3.8", shift, trivial_factor(shift), shift.coordinate_potential(), 0.5, fam, SMALL)
    b = vp_check("T3.8", shift, trivial_factor(shift), shift.coordinate_potential(), 0.5, fam, SMALL)
    assert a.rows() == b.rows()


def test_remark54_one_fiber_and_two_fibers():
    shift = build_full_shift(2, 1, 2)
    from relmdim.covers import Partition
    alpha = Partition.from_labels(shift.words[:, shift.W])
    triv = trivial_factor(shift)
    fam_nu = MeasureFamily.finite(triv.codomain, [Measure([1.0])])
    rep = remark54_consistency(shift, triv, shift.zero_potential(), alpha, fam_nu, SMALL)
    assert rep.gap == pytest.approx(0) and rep.ok
    # two fibers: a 4-cycle over y = 0 and a fixed point over y = 1
    X = MapSystem(MetricSpace.from_points(np.arange(5, dtype=float)), [1, 2, 3, 0, 4])
    Y = MapSystem(MetricSpace.from_points([0.0, 1.0]), [0, 1])
    f = FactorMap(X, Y, [0, 0, 0, 0, 1])
    U = Partition.from_labels([0, 1, 2, 3, 4])
    Yfam = MeasureFamily.finite(Y, [Measure([1, 0]), Measure([0.5, 0.5]), Measure([0, 1])])
    rep = remark54_consistency(X, f, Potential(np.zeros(5)), U, Yfam, SMALL, n=2)
    assert rep.argmax == (0.0,) and rep.gap == pytest.approx(0)
