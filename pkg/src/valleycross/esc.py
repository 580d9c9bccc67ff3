"""Stable resident configurations: spreading neighbourhoods, stability degrees,
mutant candidates, certification, and equilibrium prefactors.

A resident set is certified iff it coexists at a stable equilibrium and every
non-resident trait within graph distance < alpha is unfit.  The prefactor
``a_w`` gives the quasi-stationary subpopulation size ``a_w * K * mu**d`` of a
trait at distance ``d`` inside the spreading neighbourhood.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import EscRejection, ModelError
from .lv import LVEquilibrium, invasion_fitness, solve_equilibrium
from .model import TraitGraphModel, distance_map, shortest_paths

INF = math.inf


@dataclass(frozen=True)
class EscDescriptor:
    """A certified stable resident configuration and its derived structure."""

    resident: frozenset[str]
    equilibrium: LVEquilibrium
    v_alpha: frozenset[str]
    boundary: frozenset[str]
    stability_degree: float  # integer-valued, or math.inf
    mutant_candidates: frozenset[str]
    beta_profile: dict[str, float]
    prefactors: dict[str, float]

    @property
    def is_absorbing(self) -> bool:
        return self.stability_degree == INF

    def to_dict(self) -> dict:
        return {
            "resident": sorted(self.resident),
            "stability_degree": None
            if self.stability_degree == INF
            else int(self.stability_degree),
            "mutant_candidates": sorted(self.mutant_candidates),
            "v_alpha": sorted(self.v_alpha),
            "boundary": sorted(self.boundary),
            "equilibrium": {v: self.equilibrium.values[v] for v in sorted(self.resident)},
            "beta_profile": {w: self.beta_profile[w] for w in sorted(self.beta_profile)},
            "prefactors": {w: self.prefactors[w] for w in sorted(self.prefactors)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def mutation_neighbourhood(model: TraitGraphModel, resident):
    """Traits within distance < alpha of the residents, and the boundary layer
    at distance floor(alpha)."""
    resident = _resident_set(model, resident)
    dist = distance_map(model, resident)
    v_alpha = frozenset(w for w in model.vertices if dist[w] < model.alpha)
    floor_a = math.floor(model.alpha)
    boundary = frozenset(w for w in model.vertices if dist[w] == floor_a)
    return v_alpha, boundary


def stability_degree(model: TraitGraphModel, resident) -> float:
    """Distance from the residents to the nearest fit trait.

    0 when the residents cannot coexist, inf when no fit trait is reachable.
    """
    resident = _resident_set(model, resident)
    eq, _ = solve_equilibrium(model, resident)
    if eq is None:
        return 0
    dist = distance_map(model, resident)
    best = INF
    for w in model.vertices:
        if w in resident:
            continue
        if invasion_fitness(model, eq, w) > 0 and dist[w] < best:
            best = dist[w]
    return best


def mutant_candidates(model: TraitGraphModel, resident) -> frozenset[str]:
    """Fit traits at the minimal distance from the residents (empty when none)."""
    resident = _resident_set(model, resident)
    eq, _ = solve_equilibrium(model, resident)
    if eq is None:
        raise EscRejection("no-coexistence", f"resident set {sorted(resident)}")
    dist = distance_map(model, resident)
    fit = {
        w: dist[w]
        for w in model.vertices
        if w not in resident and invasion_fitness(model, eq, w) > 0 and dist[w] < INF
    }
    if not fit:
        return frozenset()
    level = min(fit.values())
    return frozenset(w for w, dw in fit.items() if dw == level)


def certify_esc(model: TraitGraphModel, resident) -> EscDescriptor:
    """Certify a resident set, or raise :class:`EscRejection` with the reason."""
    if not resident:
        raise EscRejection("empty-resident")
    resident = _resident_set(model, resident)
    eq, why = solve_equilibrium(model, resident)
    if eq is None:
        raise EscRejection("no-coexistence", why)
    dist = distance_map(model, resident)
    v_alpha, boundary = mutation_neighbourhood(model, resident)
    for w in sorted(v_alpha - resident):
        if invasion_fitness(model, eq, w) > 0:
            raise EscRejection(
                "fit-trait-inside-neighbourhood",
                f"trait {w!r} is fit against {sorted(resident)}",
            )
    degree = stability_degree(model, resident)
    candidates = (
        mutant_candidates(model, resident) if degree < INF else frozenset()
    )
    beta = {
        w: max(0.0, 1.0 - dist[w] / model.alpha) if dist[w] < INF else 0.0
        for w in model.vertices
    }
    desc = EscDescriptor(
        resident=resident,
        equilibrium=eq,
        v_alpha=v_alpha,
        boundary=boundary,
        stability_degree=degree,
        mutant_candidates=candidates,
        beta_profile=beta,
        prefactors={},
    )
    prefactors = equilibrium_prefactors(model, desc)
    object.__setattr__(desc, "prefactors", prefactors)
    return desc


def equilibrium_prefactors(model: TraitGraphModel, esc: EscDescriptor) -> dict[str, float]:
    """Layer-by-layer recursion for the quasi-stationary size prefactors a_w.

    Residents carry a_w = nbar_w (a single vertex counts as a path of length
    zero).  Each further layer accumulates b*m/|f| factors from the previous
    one; by distributivity this equals the sum over shortest paths.
    """
    dist = distance_map(model, esc.resident)
    layers: dict[int, list[str]] = {}
    for w in esc.v_alpha:
        layers.setdefault(int(dist[w]), []).append(w)
    a: dict[str, float] = {}
    for v in esc.resident:
        a[v] = esc.equilibrium.values[v]
    for depth in sorted(layers):
        if depth == 0:
            continue
        for w in layers[depth]:
            f_w = invasion_fitness(model, esc.equilibrium, w)
            total = 0.0
            for u in model.in_neighbors(w):
                if dist.get(u) == depth - 1 and u in a:
                    total += a[u] * model.b(u) * model.m(u, w) / abs(f_w)
            a[w] = total
    return a


def prefactors_by_path_enumeration(
    model: TraitGraphModel, esc: EscDescriptor
) -> dict[str, float]:
    """Independent computation of the prefactors as an explicit path sum.

    Kept as a cross-check for the recursion in :func:`equilibrium_prefactors`.
    """
    dist = distance_map(model, esc.resident)
    a: dict[str, float] = {}
    for w in esc.v_alpha:
        if w in esc.resident:
            a[w] = esc.equilibrium.values[w]
            continue
        total = 0.0
        for path in shortest_paths(model, esc.resident, w):
            term = esc.equilibrium.values[path.start]
            for i in range(1, len(path.vertices)):
                u, x = path.vertices[i - 1], path.vertices[i]
                f_x = invasion_fitness(model, esc.equilibrium, x)
                term *= model.b(u) * model.m(u, x) / abs(f_x)
            total += term
        if dist[w] < INF:
            a[w] = total
    return a


def _resident_set(model: TraitGraphModel, resident) -> frozenset[str]:
    if isinstance(resident, str):
        resident = {resident}
    resident = frozenset(resident)
    if not resident:
        raise ModelError("resident set must be nonempty")
    for v in resident:
        model.require_vertex(v)
    return resident
