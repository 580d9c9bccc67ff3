"""Closed-form metastable transition rates out of a stable resident configuration.

A successful transition travels along a shortest mutation path from the
residents to a fit trait at distance L.  The rate of such a path factors into
three blocks: a within-neighbourhood block (macroscopic subpopulations feeding
each other at rates ``b*m/|f|``), an excursion block (subcritical traits
outside the neighbourhood traversed at speed ``lambda(rho)*m`` per excursion),
and a fixation factor ``f/b`` for the final fit trait.  On the time scale
``1/(K mu**L)`` the exit is exponential with the total rate and the triggering
trait is chosen according to the per-trait split.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import ModelError
from .esc import EscDescriptor
from .excursions import birth_fraction, expected_births
from .lv import invasion_fitness
from .model import MutationPath, TraitGraphModel, distance_map, shortest_paths


@dataclass(frozen=True)
class PathRateBreakdown:
    """Rate of one shortest path, with each factor block kept inspectable."""

    path: MutationPath
    within_block: float  # nbar(start) * prod b*m/|f| inside the neighbourhood
    bridge: float  # b*m step leaving the neighbourhood
    excursion_block: float  # prod lambda(rho)*m across unfit outside traits
    fixation_factor: float  # f(end)/b(end)
    arrival_rate: float  # within * bridge * excursion
    total: float  # arrival_rate * fixation_factor

    def to_dict(self) -> dict:
        return {
            "path": list(self.path.vertices),
            "within_block": self.within_block,
            "bridge": self.bridge,
            "excursion_block": self.excursion_block,
            "fixation_factor": self.fixation_factor,
            "arrival_rate": self.arrival_rate,
            "total": self.total,
        }


@dataclass(frozen=True)
class ExitLaw:
    """Exponential exit law of a stable resident configuration."""

    resident: frozenset[str]
    per_trait: dict[str, float]
    exit_rate: float
    fixation_split: dict[str, float]
    time_scale_exponent: int  # exit happens on times of order 1/(K mu**L)
    breakdowns: dict[str, tuple[PathRateBreakdown, ...]]

    def to_dict(self) -> dict:
        return {
            "resident": sorted(self.resident),
            "per_trait": {w: self.per_trait[w] for w in sorted(self.per_trait)},
            "exit_rate": self.exit_rate,
            "fixation_split": {
                w: self.fixation_split[w] for w in sorted(self.fixation_split)
            },
            "time_scale_exponent": self.time_scale_exponent,
            "paths": {
                w: [b.to_dict() for b in self.breakdowns[w]]
                for w in sorted(self.breakdowns)
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def path_rate(
    model: TraitGraphModel, esc: EscDescriptor, path: MutationPath
) -> PathRateBreakdown:
    """Rate contribution of one shortest path from the residents to a fit trait."""
    L = esc.stability_degree
    if L == math.inf or path.length != L:
        raise ModelError(
            f"path length {path.length} does not match the stability degree {L}"
        )
    if path.start not in esc.resident:
        raise ModelError(f"path must start at a resident trait, got {path.start!r}")
    _check_edges(model, path)
    _check_sign_pattern(model, esc, path)

    floor_a = math.floor(model.alpha)
    verts = path.vertices
    within = esc.equilibrium.values[path.start]
    for i in range(1, min(floor_a, path.length) + 1):
        u, x = verts[i - 1], verts[i]
        f_x = invasion_fitness(model, esc.equilibrium, x)
        within *= model.b(u) * model.m(u, x) / abs(f_x)
    bridge = model.b(verts[floor_a]) * model.m(verts[floor_a], verts[floor_a + 1])
    excursion = 1.0
    for j in range(floor_a + 1, path.length):
        rho = birth_fraction(model, esc.equilibrium, verts[j])
        excursion *= expected_births(rho) * model.m(verts[j], verts[j + 1])
    fixation = invasion_fitness(model, esc.equilibrium, path.end) / model.b(path.end)
    arrival = within * bridge * excursion
    return PathRateBreakdown(
        path=path,
        within_block=within,
        bridge=bridge,
        excursion_block=excursion,
        fixation_factor=fixation,
        arrival_rate=arrival,
        total=arrival * fixation,
    )


def trait_rate(model: TraitGraphModel, esc: EscDescriptor, w: str) -> float:
    """Total rate towards one mutant candidate, summed over shortest paths."""
    if w not in esc.mutant_candidates:
        raise ModelError(
            f"trait {w!r} is not a mutant candidate of {sorted(esc.resident)}"
        )
    return sum(b.total for b in _trait_breakdowns(model, esc, w))


def exit_law(model: TraitGraphModel, esc: EscDescriptor) -> ExitLaw:
    """Full exit law: per-trait rates, total rate, and the fixation split."""
    if esc.is_absorbing:
        raise ModelError(
            f"resident set {sorted(esc.resident)} is absorbing (no fit trait reachable)"
        )
    breakdowns = {
        w: _trait_breakdowns(model, esc, w) for w in sorted(esc.mutant_candidates)
    }
    per_trait = {w: sum(b.total for b in bs) for w, bs in breakdowns.items()}
    total = sum(per_trait.values())
    split = {w: rate / total for w, rate in per_trait.items()}
    return ExitLaw(
        resident=esc.resident,
        per_trait=per_trait,
        exit_rate=total,
        fixation_split=split,
        time_scale_exponent=int(esc.stability_degree),
        breakdowns=breakdowns,
    )


def pathwise_arrival_rate(
    model: TraitGraphModel, esc: EscDescriptor, path: MutationPath
) -> float:
    """Arrival rate of mutants along a path leaving the spreading neighbourhood.

    The path must start on the boundary layer; the start's quasi-stationary
    prefactor absorbs the within-neighbourhood block, so the rate is
    ``a(start) * b*m * prod lambda(rho)*m`` with no fixation factor.  On time
    scales ``1/(K mu**d)`` with ``d = floor(alpha) + path length`` this is the
    intensity of the Poisson stream of arrivals at the path's end.
    """
    verts = path.vertices
    if verts[0] not in esc.boundary:
        raise ModelError(
            f"arrival path must start on the boundary layer, got {verts[0]!r}"
        )
    _check_edges(model, path)
    dist = distance_map(model, esc.resident)
    for i, x in enumerate(verts[1:], start=1):
        if dist[x] < model.alpha:
            raise ModelError(
                f"arrival path re-enters the spreading neighbourhood at index {i} ({x!r})"
            )
        if i < path.length:
            f_x = invasion_fitness(model, esc.equilibrium, x)
            if f_x >= 0:
                raise ModelError(
                    f"interior trait at index {i} ({x!r}) must be unfit, "
                    f"fitness {f_x}"
                )
    rate = esc.prefactors[verts[0]] * model.b(verts[0]) * model.m(verts[0], verts[1])
    for j in range(1, path.length):
        rho = birth_fraction(model, esc.equilibrium, verts[j])
        rate *= expected_births(rho) * model.m(verts[j], verts[j + 1])
    return rate


def _trait_breakdowns(model, esc, w) -> tuple[PathRateBreakdown, ...]:
    return tuple(
        path_rate(model, esc, p) for p in shortest_paths(model, esc.resident, w)
    )


def _check_edges(model: TraitGraphModel, path: MutationPath) -> None:
    for u, x in zip(path.vertices, path.vertices[1:]):
        if (u, x) not in model.edges:
            raise ModelError(f"({u},{x}) is not an edge of the trait graph")


def _check_sign_pattern(model, esc, path) -> None:
    for i, x in enumerate(path.vertices):
        if i == 0:
            continue
        f_x = invasion_fitness(model, esc.equilibrium, x)
        if i < path.length and f_x >= 0:
            raise ModelError(
                f"intermediate trait at index {i} ({x!r}) must be unfit, fitness {f_x}"
            )
        if i == path.length and f_x <= 0:
            raise ModelError(
                f"final trait at index {i} ({x!r}) must be fit, fitness {f_x}"
            )
