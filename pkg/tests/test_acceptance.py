"""Acceptance gate: one test per release criterion, each ending in a summary line.

The statistical criteria compare finite-population Monte Carlo estimates to
closed-form limit values; acceptance is trend-plus-tolerance, not exact
reproduction, and every threshold is stated inline.
"""

import math
import time

import numpy as np
import pytest

import valleycross as vc
from valleycross.esc import prefactors_by_path_enumeration
from valleycross.metagraph import l_scale_probability_by_enumeration

from conftest import (
    check_lnk_fixed_point,
    check_nestedness,
    check_prefactor_equality,
    check_probability_conservation,
    fs,
)

PREFACTOR_FIXTURE = {
    "vertices": ["0", "1", "2"],
    "edges": [
        {"from": "0", "to": "1", "m": 1.0},
        {"from": "1", "to": "2", "m": 1.0},
    ],
    "birth": {"0": 2.0, "1": 2.0, "2": 2.0},
    "death": {"0": 1.0, "1": 1.5, "2": 1.6},
    "competition": {"equal": 1.0},
    "alpha": 2.5,
}

ONE_STEP_INVASION = {
    "vertices": ["0", "1"],
    "edges": [{"from": "0", "to": "1", "m": 1.0}],
    "birth": {"0": 2.0, "1": 5.0},
    "death": {"0": 1.0, "1": 1.0},
    "competition": {
        "0": {"0": 1.0, "1": 4.0},
        "1": {"0": 1.0, "1": 4.0},
    },
    "alpha": 1.5,
}

LOGISTIC = {
    "vertices": ["0"],
    "edges": [],
    "birth": {"0": 2.0},
    "death": {"0": 1.0},
    "competition": {"equal": 1.0},
    "alpha": 0.5,
}


def report(n, detail):
    print(f"ACCEPTANCE CRITERION {n}: PASS — {detail}")


def time_average(record, burn_in):
    """Per-trait time averages of the sampled counts after a burn-in window."""
    t = record.sample_times
    counts = record.sample_counts
    mask = t >= burn_in
    t, counts = t[mask], counts[mask]
    dt = np.diff(t)
    weights = dt / dt.sum()
    return {
        v: float(np.sum(counts[:-1, i] * weights))
        for i, v in enumerate(record.trait_order)
    }


def test_criterion_1_excursion_combinatorics():
    start = time.monotonic()
    # (i) normalization and (ii) closed-form mean across the parameter grid
    for rho in [0.05 * i for i in range(1, 10)]:
        total = sum(vc.excursion_pmf(rho, k) for k in range(5000))
        assert abs(total - 1.0) < 1e-8
        assert abs(vc.expected_births(rho) - rho / (1 - 2 * rho)) < 1e-10
    # (iii) one million simulated discrete excursions at rho = 0.3
    rho, n = 0.3, 1_000_000
    rng = np.random.default_rng(2024)
    size = np.ones(n, dtype=np.int64)
    births = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    rounds = 0
    while active.size:
        up = rng.random(active.size) < rho
        births[active[up]] += 1
        size[active] += np.where(up, 1, -1)
        active = active[size[active] > 0]
        rounds += 1
        assert rounds < 1_000_000, "excursions failed to terminate"
    mean = births.mean()
    se = births.std(ddof=1) / math.sqrt(n)
    target = rho / (1 - 2 * rho)
    assert abs(mean - target) <= 4.0 * se
    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    report(
        1,
        f"grid exact to 1e-8/1e-10; 1e6-excursion mean {mean:.5f} vs {target} "
        f"(|Δ| = {abs(mean - target) / se:.2f} SE) in {elapsed:.1f}s",
    )


def test_criterion_2_example_fixtures(models, metas, esc1):
    # branching example: two-step stability and both distance-2 candidates
    assert esc1.stability_degree == 2
    assert esc1.mutant_candidates == frozenset({"2a", "2b"})
    # two-route example: the exit rate is exactly the sum of its path rates
    law2 = vc.exit_law(models["ex2"], vc.certify_esc(models["ex2"], {"0"}))
    assert law2.exit_rate == pytest.approx(
        sum(b.total for b in law2.breakdowns["2"]), rel=1e-14
    )
    # same-destination example: one merged transition with probability one
    assert metas["ex3"].edges[(fs("0"), fs("4"))].probability == pytest.approx(
        1.0, abs=1e-12
    )
    # switch example: the two-trait configuration certifies
    assert vc.certify_esc(models["ex4"], {"0", "3"}).stability_degree == 2
    # re-invasion example: a self-transition of the recurrent configuration
    assert metas["ex5"].edges[(fs("2"), fs("2"))].probability == pytest.approx(1.0)
    # cyclic example: stability partition and both collapse topologies
    partition = metas["ex6"].level_partition()
    assert partition[1] == [fs("1"), fs("2"), fs("3"), fs("5"), fs("7")]
    assert partition[2] == [fs("0"), fs("4")]
    assert partition[math.inf] == [fs("6")]
    g1 = vc.build_l_scale_graph(metas["ex6"], 1)
    assert g1.edges[(fs("3"), fs("4"))] == pytest.approx(0.5)
    assert g1.edges[(fs("3"), fs("7"))] == pytest.approx(0.5)
    g2 = vc.build_l_scale_graph(metas["ex6"], 2)
    assert set(g2.edges) == {(fs("0"), fs("4")), (fs("4"), fs("6"))}
    # trapped-cycle example: certain escape fails at level 2 with a witness
    verdict = vc.check_no_cycles(metas["ex7"], 2)
    assert not verdict
    assert set(verdict.witness) == {fs("2"), fs("3"), fs("7")}
    # chain example: the level-3 collapse steps over the faster node
    g3 = vc.build_l_scale_graph(metas["ex8"], 3)
    assert (fs("0"), fs("5")) in g3.edges
    assert g3.edges[(fs("0"), fs("5"))] == pytest.approx(1.0, abs=1e-12)
    # merge example: direct and indirect routes fuse into one sure transition
    g3m = vc.build_l_scale_graph(metas["ex9"], 3)
    assert [e for e in g3m.edges if e[0] == fs("0")] == [(fs("0"), fs("5"))]
    assert g3m.edges[(fs("0"), fs("5"))] == pytest.approx(1.0, abs=1e-12)
    report(2, "all nine bundled examples reproduced exactly")


def test_criterion_3_collapse_solver_equivalence(metas):
    meta = metas["ex6"]
    start = time.monotonic()
    g2 = vc.build_l_scale_graph(meta, 2)
    worst = 0.0
    for source in g2.sources:
        enum = l_scale_probability_by_enumeration(meta, 2, source, depth=30)
        for target, p in enum.items():
            worst = max(worst, abs(g2.edges[(source, target)] - p))
    elapsed = time.monotonic() - start
    assert worst < 1e-9
    assert elapsed < 1.0
    report(
        3,
        f"linear solve vs depth-30 enumeration: max |Δ| = {worst:.2e} "
        f"in {elapsed:.2f}s",
    )


def test_criterion_4_prefactor_law():
    start = time.monotonic()
    model = vc.load_model(PREFACTOR_FIXTURE)
    esc = vc.certify_esc(model, {"0"})
    assert esc.prefactors == pytest.approx({"0": 1.0, "1": 4.0, "2": 40.0 / 3.0})
    K = 10**5
    mu = vc.mu_k(model.alpha, K)
    counts = vc.esc_initial_counts(model, esc, K)
    record = vc.simulate(
        model, K, counts, vc.StopCondition(horizon=220.0), seed=77,
        sample_stride=16,
    )
    averages = time_average(record, burn_in=50.0)
    dist = vc.distance_map(model, {"0"})
    errors = {}
    for w in sorted(esc.v_alpha):
        scaled = averages[w] / (K * mu ** dist[w])
        errors[w] = abs(scaled - esc.prefactors[w]) / esc.prefactors[w]
        assert errors[w] <= 0.15, (w, scaled, esc.prefactors[w])
    elapsed = time.monotonic() - start
    assert elapsed < 300.0
    report(
        4,
        "time-averaged sizes vs prefactors: "
        + ", ".join(f"{w}: {e:.1%}" for w, e in errors.items())
        + f" (limit 15%) in {elapsed:.0f}s",
    )


def test_criterion_5_exit_law(ex1, esc1):
    start = time.monotonic()
    K_list = [300, 1000, 3000]
    reports = vc.exit_law_trend(ex1, esc1, K_list, replicates=500, seed=21)
    theory = reports[0].theory["mean_rescaled_time"]
    rel_errors, rel_ses = [], []
    for rep in reports:
        mean = rep.empirical["mean_rescaled_time"]
        lo, hi = rep.empirical["ci95"]
        rel_errors.append(abs(mean - theory) / theory)
        rel_ses.append((hi - lo) / (2 * 1.96) / theory)
    # (a) mean within 25% at the largest K
    assert rel_errors[-1] <= 0.25
    # (b) error trend non-increasing up to confidence-interval overlap
    for i in range(len(K_list) - 1):
        assert rel_errors[i + 1] <= rel_errors[i] + 1.96 * (
            rel_ses[i] + rel_ses[i + 1]
        )
    # (c) exponential-law KS test not rejected at 1% at the largest K
    assert reports[-1].tests["ks_pvalue"] >= 0.01
    # (d) triggering-trait frequencies within 3 binomial sigma
    last = reports[-1]
    n = sum(last.empirical["split_counts"].values())
    assert not last.empirical["off_split_triggers"]
    for w, p in last.theory["fixation_split"].items():
        count = last.empirical["split_counts"][w]
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(count - n * p) <= 3.0 * sigma, (w, count, n * p)
    elapsed = time.monotonic() - start
    assert elapsed < 1800.0
    report(
        5,
        f"relative mean errors {[f'{e:.1%}' for e in rel_errors]} over K={K_list}, "
        f"KS p={reports[-1].tests['ks_pvalue']:.3f}, splits within 3 sigma, "
        f"in {elapsed:.0f}s",
    )


def test_criterion_6_log_time_convergence():
    start = time.monotonic()
    model = vc.load_model(ONE_STEP_INVASION)
    result = vc.compare_lnk(
        model,
        [1000, 10_000, 100_000],
        {"0": 1.0, "1": 2.0 / 3.0},
        seed=5,
        n_seeds=50,
    )
    medians = [
        result.empirical["per_K"][K]["median_sup_distance"]
        for K in (1000, 10_000, 100_000)
    ]
    assert medians[0] > medians[1] > medians[2]
    assert medians[-1] < 0.05
    elapsed = time.monotonic() - start
    assert elapsed < 900.0
    report(
        6,
        f"median sup-distances {[f'{m:.4f}' for m in medians]} for "
        f"K=1e3,1e4,1e5 (cap 0.05) in {elapsed:.0f}s",
    )


def test_criterion_7_simulator_self_consistency(ex1):
    model = vc.load_model(LOGISTIC)
    K = 20_000
    record = vc.simulate(
        model,
        K,
        {"0": K},
        vc.StopCondition(horizon=math.inf),
        seed=123,
        max_events=1_200_000,
    )
    # incremental channel rates stay glued to the exact ones
    assert record.events >= 1_000_000
    assert record.rate_drift < 1e-6
    # stationary mean of the mutation-free logistic model: K (b - d) / c
    averages = time_average(record, burn_in=2.0)
    mask = record.sample_times >= 2.0
    values = record.sample_counts[mask, 0].astype(float)
    batches = np.array_split(values, 10)
    batch_means = np.array([b.mean() for b in batches])
    se = batch_means.std(ddof=1) / math.sqrt(len(batches))
    tolerance = max(5.0 * se, 0.01 * K)
    assert abs(averages["0"] - K) <= tolerance
    # bit-level reproducibility per (model, K, seed)
    a = vc.simulate(ex1, 500, {"0": 500}, vc.StopCondition(horizon=1.0), seed=9)
    b = vc.simulate(ex1, 500, {"0": 500}, vc.StopCondition(horizon=1.0), seed=9)
    assert a.final_counts == b.final_counts
    assert a.events == b.events
    assert np.array_equal(a.sample_counts, b.sample_counts)
    report(
        7,
        f"drift {record.rate_drift:.2e} after {record.events} events; "
        f"logistic mean {averages['0']:.0f} vs {K} (tolerance {tolerance:.0f}); "
        "identical replay",
    )


def test_criterion_8_invariant_suites(models, metas):
    for name in sorted(metas):
        check_probability_conservation(metas[name])
        check_prefactor_equality(models[name], metas[name])
        check_lnk_fixed_point(models[name], metas[name])
        check_nestedness(metas[name])
    # spot value for the recursion-vs-enumeration pair on the branching example
    esc = vc.certify_esc(models["ex1"], {"0"})
    assert prefactors_by_path_enumeration(models["ex1"], esc) == pytest.approx(
        esc.prefactors
    )
    report(
        8,
        "probability conservation, prefactor recursion equality, stationary "
        "profiles and collapse nestedness hold on all nine examples",
    )
