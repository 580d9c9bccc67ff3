"""Shared fixtures: bundled example models and their certified configurations."""

from __future__ import annotations

import pytest

import valleycross as vc
from valleycross.fixtures import fixture_path, load_fixture

EXAMPLES = [f"ex{i}.json" for i in range(1, 10)]


@pytest.fixture(scope="session")
def models():
    """All bundled example models, keyed 'ex1' .. 'ex9'."""
    return {name.split(".")[0]: load_fixture(name) for name in EXAMPLES}


@pytest.fixture(scope="session")
def ex1(models):
    return models["ex1"]


@pytest.fixture(scope="session")
def ex2(models):
    return models["ex2"]


@pytest.fixture(scope="session")
def ex3(models):
    return models["ex3"]


@pytest.fixture(scope="session")
def ex4(models):
    return models["ex4"]


@pytest.fixture(scope="session")
def ex5(models):
    return models["ex5"]


@pytest.fixture(scope="session")
def ex6(models):
    return models["ex6"]


@pytest.fixture(scope="session")
def ex7(models):
    return models["ex7"]


@pytest.fixture(scope="session")
def ex8(models):
    return models["ex8"]


@pytest.fixture(scope="session")
def ex9(models):
    return models["ex9"]


@pytest.fixture(scope="session")
def esc1(ex1):
    """Certified single-resident configuration {0} of the branching example."""
    return vc.certify_esc(ex1, {"0"})


@pytest.fixture(scope="session")
def meta6(ex6):
    """Full metastability graph of the cyclic example (exhaustive enumeration)."""
    return vc.build_meta_graph(ex6)


@pytest.fixture(scope="session")
def meta8(ex8):
    return vc.build_meta_graph(ex8)


def model_path(name: str) -> str:
    return str(fixture_path(name))


def fs(*names) -> frozenset:
    return frozenset(names)


# seed resident sets used to build each example's metastability graph
# (None = exhaustive enumeration over all coexisting subsets)
META_SEEDS = {
    "ex1": {"0"},
    "ex2": {"0"},
    "ex3": {"0"},
    "ex4": {"0", "3"},
    "ex5": {"0"},
    "ex6": None,
    "ex7": None,
    "ex8": None,
    "ex9": {"0"},
}


@pytest.fixture(scope="session")
def metas(models):
    return {
        name: vc.build_meta_graph(models[name], seed)
        for name, seed in META_SEEDS.items()
    }


# ---------------------------------------------------------------------------
# invariant checks shared by the property suite and the acceptance gate


def check_probability_conservation(meta):
    """Outgoing probabilities sum to one at every non-absorbing node, on the
    metastability graph and on every valid time-scale collapse."""
    import math

    for v, node in meta.nodes.items():
        if node.is_absorbing or node.frontier_invalid:
            continue
        total = sum(meta.successors(v).values())
        assert abs(total - 1.0) < 1e-12, (sorted(v), total)
    levels = sorted(
        {int(n.stability_degree) for n in meta.nodes.values()
         if n.stability_degree < math.inf}
    )
    for level in levels:
        if not vc.check_no_cycles(meta, level):
            continue
        g = vc.build_l_scale_graph(meta, level)
        for source in g.sources:
            total = sum(p for (s, _), p in g.edges.items() if s == source)
            assert abs(total - 1.0) < 1e-12, (level, sorted(source), total)


def check_prefactor_equality(model, meta):
    """The layer recursion for the quasi-stationary prefactors agrees with the
    explicit shortest-path sum on every node."""
    from valleycross.esc import prefactors_by_path_enumeration

    for node in meta.nodes.values():
        enum = prefactors_by_path_enumeration(model, node.esc)
        assert set(enum) == set(node.esc.prefactors)
        for w, value in enum.items():
            assert node.esc.prefactors[w] == pytest.approx(value, rel=1e-11)


def check_lnk_fixed_point(model, meta):
    """Every certified configuration's exponent profile is stationary for the
    log-time dynamics."""
    for node in meta.nodes.values():
        trajectory = vc.run_lnk(model, node.esc.beta_profile)
        assert trajectory.termination.kind == "esc_reached"
        assert trajectory.termination.resident == node.resident
        for w, value in node.esc.beta_profile.items():
            assert trajectory.final_beta[w] == pytest.approx(value, abs=1e-12)


def check_nestedness(meta):
    """Node sets of the time-scale collapses are nested: raising the level can
    only remove nodes."""
    import math

    levels = sorted(
        {int(n.stability_degree) for n in meta.nodes.values()
         if n.stability_degree < math.inf}
    )
    previous = None
    for level in levels:
        if not vc.check_no_cycles(meta, level):
            previous = None
            continue
        nodes = set(vc.build_l_scale_graph(meta, level).nodes)
        expected = {
            v for v, n in meta.nodes.items() if n.stability_degree >= level
        }
        assert nodes == expected
        if previous is not None:
            assert nodes <= previous
        previous = nodes
