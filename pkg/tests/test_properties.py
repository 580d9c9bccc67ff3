"""Invariant suites over all bundled examples, plus randomized properties."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import valleycross as vc

from conftest import (
    META_SEEDS,
    check_lnk_fixed_point,
    check_nestedness,
    check_prefactor_equality,
    check_probability_conservation,
)

EXAMPLE_NAMES = sorted(META_SEEDS)


@pytest.mark.parametrize("name", EXAMPLE_NAMES)
def test_probability_conservation(name, metas):
    check_probability_conservation(metas[name])


@pytest.mark.parametrize("name", EXAMPLE_NAMES)
def test_prefactor_recursion_equals_enumeration(name, models, metas):
    check_prefactor_equality(models[name], metas[name])


@pytest.mark.parametrize("name", EXAMPLE_NAMES)
def test_certified_profiles_are_lnk_fixed_points(name, models, metas):
    check_lnk_fixed_point(models[name], metas[name])


@pytest.mark.parametrize("name", EXAMPLE_NAMES)
def test_collapse_node_sets_are_nested(name, metas):
    check_nestedness(metas[name])


@pytest.mark.parametrize("name", EXAMPLE_NAMES)
def test_recertification_is_stable(name, models, metas):
    # certifying a discovered node again reproduces its descriptor
    model = models[name]
    for node in metas[name].nodes.values():
        again = vc.certify_esc(model, node.resident)
        assert again.stability_degree == node.stability_degree
        assert again.mutant_candidates == node.esc.mutant_candidates
        assert again.prefactors == pytest.approx(node.esc.prefactors)


# ---------------------------------------------------------------------------
# randomized properties

rhos = st.floats(min_value=0.0, max_value=0.49, allow_nan=False)


@given(rho=rhos)
@settings(deadline=None)
def test_excursion_pmf_is_a_distribution(rho):
    partial = sum(vc.excursion_pmf(rho, k) for k in range(200))
    assert 0.0 <= partial <= 1.0 + 1e-12
    assert vc.excursion_pmf(rho, 0) == pytest.approx(1.0 - rho)


@given(rho=st.floats(min_value=0.0, max_value=0.45))
@settings(deadline=None)
def test_mean_births_matches_closed_form(rho):
    assert vc.expected_births(rho) == pytest.approx(
        rho / (1.0 - 2.0 * rho), abs=1e-10
    )


@given(a=rhos, b=rhos)
@settings(deadline=None)
def test_mean_births_monotone(a, b):
    lo, hi = sorted((a, b))
    assert vc.expected_births(lo) <= vc.expected_births(hi) + 1e-12


@given(
    alpha=st.floats(min_value=0.3, max_value=3.7).filter(
        lambda a: abs(a - round(a)) > 1e-6
    ),
    K=st.integers(min_value=2, max_value=10**6),
)
@settings(deadline=None)
def test_mutation_scale(alpha, K):
    mu = vc.mu_k(alpha, K)
    assert mu == pytest.approx(K ** (-1.0 / alpha), rel=1e-12)
    assert 0.0 < mu < 1.0


@given(
    n=st.integers(min_value=2, max_value=4),
    births=st.lists(
        st.floats(min_value=0.5, max_value=5.0), min_size=4, max_size=4
    ),
    deaths=st.lists(
        st.floats(min_value=0.0, max_value=4.0), min_size=4, max_size=4
    ),
)
@settings(deadline=None, max_examples=50)
def test_chain_model_round_trip(n, births, deaths):
    verts = [str(i) for i in range(n)]
    cfg = {
        "vertices": verts,
        "edges": [
            {"from": str(i), "to": str(i + 1), "m": 1.0} for i in range(n - 1)
        ],
        "birth": {v: births[i] for i, v in enumerate(verts)},
        "death": {v: deaths[i] for i, v in enumerate(verts)},
        "competition": {"equal": 1.0},
        "alpha": 1.5,
    }
    model = vc.load_model(cfg)
    again = vc.load_model(model.to_config())
    assert again.vertices == model.vertices
    for i, v in enumerate(verts):
        assert again.b(v) == model.b(v)
        assert again.d(v) == model.d(v)
        assert vc.graph_distance(model, "0", v) == i
    assert vc.graph_distance(model, verts[-1], "0") == math.inf
