"""One test per acceptance criterion; each prints a single PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

import oracles
from conftest import VERDICTS
from relmdim import checks
from relmdim.cli import main
from relmdim.covers import Partition, fiber_adapted_partition
from relmdim.entropy import brin_katok_report, partition_entropy_rate
from relmdim.measures import Measure, ProductSpec, disintegrate, product_measure
from relmdim.metric_core import maximal_separated_set, minimal_spanning_set
from relmdim.pressure import mdim_estimate
from relmdim.systems import (build_block_factor, build_full_shift, build_hilbert_shift,
                             hilbert_resolution, reference_cover_bound, product_cover_bound,
                             trivial_factor)
from relmdim.varprin import Budget, MeasureFamily, lw_fiberwise_check, vp_check


def verdict(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    VERDICTS.append(line)
    assert ok, line


def H(*p):
    return -sum(v * math.log(v) for v in p if v > 0)


def test_01_weighted_sum_inequalities():
    start = time.perf_counter()
    rows = checks.run_suite("lemma22", 200, seed=7)
    elapsed = time.perf_counter() - start
    bad = checks.violations(rows)
    worst = min(r["slack"] for r in rows)
    families = sorted({r["family"] for r in rows})
    verdict(1, not bad and elapsed < 120 and len(families) == 5,
            f"{len(rows)} rows over {families}, {len(bad)} violations, "
            f"min slack {worst:.3g}, {elapsed:.1f}s")


def test_02_lipschitz_in_potential():
    rows = checks.run_suite("lipschitz", None, seed=7)
    bad = checks.violations(rows)
    pairs = len({(r["instance"], r["n"]) for r in rows})
    scopes = sorted({r["family"] for r in rows})
    verdict(2, not bad and pairs == 500 and scopes == ["fiber-sup", "per-fiber"],
            f"{pairs} potential pairs, {len(rows)} rows ({scopes}), {len(bad)} violations")


def test_03_packing_spanning_duality():
    rows = checks.run_suite("duality", 200, seed=7)
    bad = checks.violations(rows)
    # brute-force confirmation of the exact cardinalities on small subsets
    rng = np.random.default_rng(7)
    mismatches = checked = 0
    for _ in range(60):
        inst = checks.random_instance(rng, 12, 3, max_fibers=1)
        sys, eps, n = inst.sys, inst.eps, inst.n_max
        K = list(range(sys.size))
        dist, step = sys.space.dist, sys.step
        got = (len(maximal_separated_set(sys, n, 2 * eps, K, "exact")),
               len(minimal_spanning_set(sys, n, eps, K, "exact")),
               len(maximal_separated_set(sys, n, eps, K, "exact")))
        want = (oracles.max_separated_size(dist, step, n, 2 * eps, K),
                oracles.min_spanning_size(dist, step, n, eps, K),
                oracles.max_separated_size(dist, step, n, eps, K))
        mismatches += got != want
        mismatches += not (want[0] <= want[1] <= want[2])
        checked += 1
    modes = sorted({r["fiber"] for r in rows})
    verdict(3, not bad and mismatches == 0,
            f"{len(rows)} suite rows ({modes}), {len(bad)} violations; "
            f"{checked} brute-force instances, {mismatches} mismatches")


def test_04_conditional_entropy_closed_form():
    shift = build_full_shift(3, 1, 5)
    f = build_block_factor(shift, [0, 0, 1])
    mu = product_measure(shift, ProductSpec.bernoulli([0.5, 0.3, 0.2]))
    alpha = Partition.from_labels(shift.words[:, shift.W])
    want = H(0.5, 0.3, 0.2) - H(0.8, 0.2)
    rep = partition_entropy_rate(shift, f, mu, alpha, [1, 2, 3, 4, 5])
    err = max(abs(v - want) for _, v in rep.per_n)
    verdict(4, err <= 1e-9, f"target {want:.10f}, max error {err:.2e} over n = 1..5")


def test_05_brin_katok_against_shannon():
    shift = build_full_shift(2, 1, 16)
    mu = product_measure(shift, ProductSpec.bernoulli([0.5, 0.5]))
    triv = trivial_factor(shift)
    # with W = 1 and eps <= 1/2 a Bowen ball pins coordinates -1 .. n, so n + 2 of them
    exact_err = 0.0
    for eps in (0.5, 0.25):
        _, hi = brin_katok_report(shift, triv, mu, eps, [1, 2, 4, 8, 16], sample=8, seed=7)
        for n, v in hi.per_n:
            exact_err = max(exact_err, abs(v - (n + 2) / n * math.log(2)))
    _, hi = brin_katok_report(shift, triv, mu, 0.25, [16], sample=8, seed=7)
    generic = hi.per_n[0][1]
    rel = abs(generic / math.log(2) - 1)
    verdict(5, exact_err <= 1e-12 and rel <= 0.10,
            f"coordinate-count formula error {exact_err:.1e}; eps 0.25, n 16 value "
            f"{generic:.4f} vs log 2 = {math.log(2):.4f} ({100 * rel:.1f}% off, needs <= 10%)")


def test_06_entropy_ordering_chain():
    rows = checks.run_suite("ordering", 100, seed=7)
    bad = checks.violations(rows)
    verdict(6, not bad and rows, f"{len(rows)} exact count comparisons, {len(bad)} violations")


def test_07_fiber_adapted_partition():
    rng = np.random.default_rng(7)
    rows = 0
    bad = 0
    for _ in range(50):
        inst = checks.random_instance(rng, 12, 1)
        V = checks.random_open_cover(rng, inst.sys.space)
        rho = float(rng.uniform(0.05, 0.6))
        beta = fiber_adapted_partition(inst.sys, inst.factor, inst.mu, V, rho)
        fam = disintegrate(inst.mu, inst.factor)
        for fm in fam.per_fiber.values():
            def count(cover):
                sets = [set(np.flatnonzero(row[fm.points])) for row in cover.matrix]
                sets = [s for s in sets if s]
                return oracles.min_sets_for_mass(sets, fm.weights, 1 - rho)
            bad += count(beta) > count(V)
            rows += 1
    suite = checks.violations(checks.run_suite("lemma61", 50, seed=7))
    verdict(7, bad == 0 and not suite,
            f"50 instances, {rows} fibers checked exhaustively, {bad} violations; "
            f"suite violations {len(suite)}")


def test_08_tame_partition():
    rows = checks.run_suite("tame", 50, seed=7)
    diam_bad = [r for r in rows if r["family"] == "diam" and r["slack"] < 0]
    strict_bad = [r for r in rows if r["family"] == "boundary" and not r["slack"] > 0]
    least = min(r["slack"] for r in rows if r["family"] == "boundary")
    verdict(8, not diam_bad and not strict_bad,
            f"50 instances, diam violations {len(diam_bad)}, boundary violations "
            f"{len(strict_bad)}, least boundary slack {least:.3g}")


def test_09_hilbert_covering_bound():
    parts = []
    ok = True
    for eps in (0.5, 0.25):
        W, g = hilbert_resolution(eps)
        model = build_hilbert_shift(g, W, 1, sample_cap=16, seed=0)
        N = product_cover_bound(model, eps)
        base2 = reference_cover_bound(eps, 2.0)
        natural = reference_cover_bound(eps, math.e)
        ok &= N <= base2
        parts.append(f"eps {eps}: N <= {N:.4g}, bound {base2:.4g} (base e {natural:.4g})")
    verdict(9, ok, "; ".join(parts))


def test_10_hilbert_mean_dimension_ratio():
    start = time.perf_counter()
    W, g = hilbert_resolution(1 / 16)
    model = build_hilbert_shift(g, W, 4, sample_cap=3000, seed=7)
    eps = [2 ** -2, 2 ** -3, 2 ** -4]
    est = mdim_estimate(model, trivial_factor(model), model.zero_potential(), eps, [1, 2, 3, 4],
                        cross_check=False)
    ratios = [r["ratio"] for r in est.table]
    elapsed = time.perf_counter() - start
    within = all(0.7 <= r <= 1.3 for r in ratios)
    approach = all(abs(b - 1) <= abs(a - 1) for a, b in zip(ratios, ratios[1:]))
    verdict(10, within and approach and elapsed < 600,
            f"sampled lower-bound semantics ({model.size} words, W={W}, g={g}); ratios "
            + ", ".join(f"{e:g}:{r:.3f}" for e, r in zip(eps, ratios))
            + f"; in [0.7, 1.3]: {within}; approaching 1: {approach}; {elapsed:.0f}s")


def test_11_variational_directions():
    failures = []
    worst_dev = 0.0
    runs = 0
    for k, n_max in ((2, 4), (3, 3)):
        shift = build_full_shift(k, 1, n_max)
        fam = MeasureFamily.bernoulli(shift)
        for name, phi in (("zero", shift.zero_potential()), ("coord", shift.coordinate_potential())):
            for tid in ("T3.4", "T3.8", "T3.9", "T4.1"):
                rep = vp_check(tid, shift, trivial_factor(shift), phi, 0.5, fam,
                               Budget(grid=10, iterations=30, restarts=2, seed=7))
                runs += 1
                if not rep.direction_ok:
                    failures.append(f"{k}/{name}/{tid}")
                if name == "zero":
                    dev = max(abs(a - 1 / k) for a in rep.argmax)
                    worst_dev = max(worst_dev, dev)
                    if dev > 1e-2:
                        failures.append(f"{k}/{name}/{tid} argmax")
    verdict(11, not failures,
            f"{runs} checks, failures {failures or 'none'}, worst uniform deviation {worst_dev:.4f}")


def test_12_fixed_nu_principle():
    shift = build_full_shift(3, 1, 3)
    f = build_block_factor(shift, [0, 0, 1])
    nu = product_measure(f.codomain, ProductSpec.bernoulli([0.8, 0.2]))
    fam = MeasureFamily.bernoulli(shift, constraint=nu, factor=f)
    rep = lw_fiberwise_check(shift, f, shift.zero_potential(), nu, fam,
                             Budget(grid=10, iterations=50, restarts=2, seed=7))
    want = H(0.4, 0.4, 0.2) - H(0.8, 0.2)
    arg_err = max(abs(a - b) for a, b in zip(rep.argmax, (0.4, 0.4, 0.2)))
    val_err = abs(rep.sup_value - want)
    verdict(12, arg_err <= 1e-3 and val_err <= 1e-3,
            f"argmax {tuple(round(a, 6) for a in rep.argmax)} (error {arg_err:.1e}), "
            f"value {rep.sup_value:.7f} vs {want:.7f} (error {val_err:.1e})")


def test_13_deterministic_outputs(tmp_path):
    cfg = {"seed": 7, "system": {"kind": "full", "k": 2, "W": 1, "n_max": 3},
           "n_schedule": [1, 2, 3], "eps_schedule": [0.9, 0.5, 0.3],
           "measure": {"kind": "bernoulli", "p": [0.6, 0.4]},
           "potential": {"kind": "coordinate"},
           "budget": {"grid": 6, "iterations": 10, "restarts": 1},
           "computations": [{"type": "pressure", "eps": 0.5},
                            {"type": "pressure", "kind": "cover", "eps": 0.5},
                            {"type": "entropy", "notion": "partition", "eps": 0.5},
                            {"type": "entropy", "notion": "shapira", "eps": 0.5, "rho": 0.1},
                            {"type": "entropy", "notion": "katok", "eps": 0.5, "rho": 0.1},
                            {"type": "entropy", "notion": "bk", "eps": 0.5},
                            {"type": "mdim"},
                            {"type": "check", "suite": "lemma22", "instances": 5},
                            {"type": "check", "suite": "ordering", "instances": 5},
                            {"type": "vp", "theorem": "T3.4", "eps": 0.5},
                            {"type": "vp", "theorem": "T4.1", "eps": 0.5},
                            {"type": "remark54"},
                            {"type": "partition", "kind": "tame", "eps": 0.5, "rho": 0.2}]}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    snapshots = []
    for run, workers in enumerate(("1", "1", "4", "8")):
        out = tmp_path / f"run{run}"
        code = main(["run", str(path), "--out", str(out), "--workers", workers])
        assert code == 0
        snapshots.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    same = all(s == snapshots[0] for s in snapshots[1:])
    verdict(13, same and len(snapshots[0]) >= 5,
            f"{len(snapshots[0])} CSV files byte-identical over 4 runs "
            f"(workers 1, 1, 4, 8): {same}")
