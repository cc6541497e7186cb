import numpy as np
import pytest

from relmdim import DomainError
from relmdim.checks import SUITES, random_instance, run_suite, violations


def test_random_instance_is_a_valid_factor_setup():
    rng = np.random.default_rng(0)
    for _ in range(20):
        inst = random_instance(rng, max_points=12, max_n=4)
        f = inst.factor
        X, Y = f.domain, f.codomain
        assert np.array_equal(f.point_map[X.step], Y.step[f.point_map])
        assert np.abs(inst.phi.values).max() <= 1
        assert inst.eps > 0 and 1 <= inst.n_max <= 4 and X.size <= 12


@pytest.mark.parametrize("name", SUITES)
def test_small_runs_have_no_violations(name):
    rows = run_suite(name, 4, seed=3)
    assert rows
    assert violations(rows) == []
    assert {"suite", "instance", "n", "fiber", "family", "lhs", "rhs", "slack"} <= set(rows[0])


def test_runs_are_reproducible():
    assert run_suite("lemma22", 3, seed=11) == run_suite("lemma22", 3, seed=11)


def test_unknown_suite():
    with pytest.raises(DomainError):
        run_suite("nope", 1)


def test_violations_threshold():
    rows = [{"slack": -1e-10}, {"slack": -1e-8}, {"slack": 0.0}]
    assert violations(rows) == [rows[1]]
