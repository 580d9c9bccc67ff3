"""Metastability graph of stable resident configurations and its time-scale
collapses.

Nodes are certified stable resident sets; an edge (v, w) carries the
probability that the next configuration after leaving v is w (mutant
candidates leading to the same destination are merged).  Collapsing the graph
to a given stability level L removes the less stable nodes: transitions
through them happen on faster time scales and are invisible on times of order
1/(K mu**L), so their visit probabilities are summed out by an absorbing
Markov-chain solve.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import AssumptionError, EscRejection, ModelError
from .esc import EscDescriptor, certify_esc
from .lnk import Termination, esc_after_fixation
from .model import TraitGraphModel
from .rates import ExitLaw, exit_law

INF = math.inf

_ENUMERATION_CAP = 15


@dataclass(frozen=True)
class MetaNode:
    resident: frozenset[str]
    esc: EscDescriptor
    stability_degree: float
    exit: ExitLaw | None  # None for absorbing nodes
    frontier_invalid: bool = False
    invalid_reason: str = ""

    @property
    def is_absorbing(self) -> bool:
        return self.exit is None


@dataclass(frozen=True)
class MetaEdge:
    source: frozenset[str]
    target: frozenset[str]
    probability: float
    contributors: dict[str, float]  # mutant trait -> its share R(v, w)


@dataclass(frozen=True)
class MetastabilityGraph:
    nodes: dict[frozenset, MetaNode]
    edges: dict[tuple[frozenset, frozenset], MetaEdge]

    def successors(self, v: frozenset) -> dict[frozenset, float]:
        return {
            e.target: e.probability
            for (s, _), e in self.edges.items()
            if s == v
        }

    def level_partition(self) -> dict[float, list[frozenset]]:
        """Partition of the nodes by stability degree (math.inf for absorbing)."""
        out: dict[float, list[frozenset]] = {}
        for v, node in self.nodes.items():
            out.setdefault(node.stability_degree, []).append(v)
        return {L: sorted(vs, key=sorted) for L, vs in out.items()}

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {
                    "resident": sorted(v),
                    "stability_degree": None
                    if node.stability_degree == INF
                    else int(node.stability_degree),
                    "exit_rate": None if node.exit is None else node.exit.exit_rate,
                    "frontier_invalid": node.frontier_invalid,
                    **(
                        {"invalid_reason": node.invalid_reason}
                        if node.frontier_invalid
                        else {}
                    ),
                }
                for v, node in sorted(self.nodes.items(), key=lambda kv: sorted(kv[0]))
            ],
            "edges": [
                {
                    "source": sorted(e.source),
                    "target": sorted(e.target),
                    "probability": e.probability,
                    "contributors": {
                        w: e.contributors[w] for w in sorted(e.contributors)
                    },
                }
                for _, e in sorted(
                    self.edges.items(), key=lambda kv: (sorted(kv[0][0]), sorted(kv[0][1]))
                )
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_dot(self) -> str:
        lines = ["digraph metastability {"]
        for v, node in sorted(self.nodes.items(), key=lambda kv: sorted(kv[0])):
            L = "inf" if node.stability_degree == INF else int(node.stability_degree)
            rate = "-" if node.exit is None else f"{node.exit.exit_rate:.6g}"
            extra = ", frontier-invalid" if node.frontier_invalid else ""
            lines.append(
                f'  "{_label(v)}" [label="{_label(v)}\\nL={L}, R={rate}{extra}"];'
            )
        for _, e in sorted(
            self.edges.items(), key=lambda kv: (sorted(kv[0][0]), sorted(kv[0][1]))
        ):
            lines.append(
                f'  "{_label(e.source)}" -> "{_label(e.target)}" '
                f'[label="p={e.probability:.6g}"];'
            )
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LScaleGraph:
    level: int
    nodes: tuple[frozenset, ...]  # all nodes with stability degree >= level
    sources: tuple[frozenset, ...]  # nodes at exactly the level
    edges: dict[tuple[frozenset, frozenset], float]  # collapsed probabilities
    rates: dict[tuple[frozenset, frozenset], float]  # exit rate x probability
    absorbing: tuple[frozenset, ...]  # nodes with stability degree > level

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "nodes": [sorted(v) for v in self.nodes],
            "sources": [sorted(v) for v in self.sources],
            "edges": [
                {
                    "source": sorted(s),
                    "target": sorted(t),
                    "probability": p,
                    "rate": self.rates[(s, t)],
                }
                for (s, t), p in sorted(
                    self.edges.items(), key=lambda kv: (sorted(kv[0][0]), sorted(kv[0][1]))
                )
            ],
            "absorbing": [sorted(v) for v in self.absorbing],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_dot(self) -> str:
        lines = [f"digraph lscale_{self.level} {{"]
        for v in self.nodes:
            shape = ", shape=doublecircle" if v in self.absorbing else ""
            lines.append(f'  "{_label(v)}" [label="{_label(v)}"{shape}];')
        for (s, t), p in sorted(
            self.edges.items(), key=lambda kv: (sorted(kv[0][0]), sorted(kv[0][1]))
        ):
            lines.append(
                f'  "{_label(s)}" -> "{_label(t)}" '
                f'[label="p={p:.6g}, R={self.rates[(s, t)]:.6g}"];'
            )
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CycleVerdict:
    """Outcome of the structural reachability check at a stability level."""

    level: int
    holds: bool
    witness: tuple[frozenset, ...] = ()

    def __bool__(self) -> bool:
        return self.holds


@dataclass(frozen=True)
class JumpStep:
    resident: frozenset[str]
    exponent: float  # stability degree: waiting time lives on 1/(K mu**L)
    waiting_time: float | None  # rescaled; None at an absorbing node
    absorbing: bool


# ---------------------------------------------------------------------------
# construction


def build_meta_graph(model: TraitGraphModel, seed_residents=None) -> MetastabilityGraph:
    """Build the metastability graph.

    With a seed resident set, explores the reachable closure by following
    every mutant candidate of every discovered node.  Without a seed, all
    coexisting subsets are enumerated (graphs up to 15 vertices only).
    """
    if seed_residents is None:
        if len(model.vertices) > _ENUMERATION_CAP:
            raise ModelError(
                f"exhaustive enumeration is capped at {_ENUMERATION_CAP} vertices; "
                "provide a seed resident set"
            )
        seeds = []
        verts = list(model.vertices)
        for k in range(1, len(verts) + 1):
            for combo in combinations(verts, k):
                try:
                    seeds.append(certify_esc(model, combo))
                except (EscRejection, AssumptionError):
                    continue
    else:
        seeds = [certify_esc(model, seed_residents)]

    nodes: dict[frozenset, MetaNode] = {}
    edges: dict[tuple[frozenset, frozenset], MetaEdge] = {}
    discovered: dict[frozenset, EscDescriptor] = {e.resident: e for e in seeds}
    queue = deque(seeds)
    while queue:
        esc = queue.popleft()
        v = esc.resident
        if v in nodes:
            continue
        if esc.is_absorbing:
            nodes[v] = MetaNode(v, esc, INF, None)
            continue
        law = exit_law(model, esc)
        destinations: dict[str, frozenset] = {}
        invalid_reason = ""
        for w in sorted(esc.mutant_candidates):
            outcome = esc_after_fixation(model, esc, w)
            if isinstance(outcome, Termination):
                invalid_reason = (
                    f"mutant {w!r} triggers {outcome.kind}: {outcome.detail}"
                )
                break
            destinations[w] = outcome
        if invalid_reason:
            nodes[v] = MetaNode(
                v, esc, esc.stability_degree, law,
                frontier_invalid=True, invalid_reason=invalid_reason,
            )
            continue
        nodes[v] = MetaNode(v, esc, esc.stability_degree, law)
        merged: dict[frozenset, dict[str, float]] = {}
        for w, target in destinations.items():
            merged.setdefault(target, {})[w] = law.per_trait[w]
        for target, contributors in merged.items():
            probability = sum(contributors.values()) / law.exit_rate
            edges[(v, target)] = MetaEdge(v, target, probability, contributors)
            if target not in discovered:
                discovered[target] = certify_esc(model, target)
                queue.append(discovered[target])
    return MetastabilityGraph(nodes, edges)


def check_no_cycles(meta: MetastabilityGraph, L: int) -> CycleVerdict:
    """Verify that from every level-L node the chain reaches stability >= L
    with probability one.

    Decided structurally: the check fails exactly when a closed communicating
    class of the chain restricted to the less-stable nodes (degree < L) is
    reachable from some level-L node.
    """
    transient = {v for v, n in meta.nodes.items() if n.stability_degree < L}
    sources = [v for v, n in meta.nodes.items() if n.stability_degree == L]
    # closed classes inside the transient set: strongly connected components
    # with no edge leaving them (dead-end transient nodes count as closed)
    sub_succ = {
        v: [t for t, _ in _out_edges(meta, v) if t in transient] for v in transient
    }
    closed_classes = []
    for comp in _sccs(sub_succ):
        comp_set = set(comp)
        leaves = False
        for v in comp:
            for t, _ in _out_edges(meta, v):
                if t not in comp_set:
                    leaves = True
                    break
            if leaves:
                break
        if not leaves:
            closed_classes.append(frozenset(comp))
    if not closed_classes:
        return CycleVerdict(L, True)
    # reachability from the sources through transient nodes
    reachable = set()
    stack = [t for v in sources for t, _ in _out_edges(meta, v) if t in transient]
    while stack:
        v = stack.pop()
        if v in reachable:
            continue
        reachable.add(v)
        stack.extend(sub_succ[v])
    for cls in closed_classes:
        if cls & reachable:
            witness = tuple(sorted(cls, key=sorted))
            return CycleVerdict(L, False, witness)
    return CycleVerdict(L, True)


def build_l_scale_graph(meta: MetastabilityGraph, L: int) -> LScaleGraph:
    """Collapse the metastability graph to the 1/(K mu**L) time scale."""
    verdict = check_no_cycles(meta, L)
    if not verdict:
        raise AssumptionError(
            f"level-{L} collapse requires certain escape from less stable nodes; "
            f"witness cycle: {[sorted(v) for v in verdict.witness]}"
        )
    node_list = sorted(
        (v for v, n in meta.nodes.items() if n.stability_degree >= L), key=sorted
    )
    sources = [v for v in node_list if meta.nodes[v].stability_degree == L]
    transient = sorted(
        (v for v, n in meta.nodes.items() if n.stability_degree < L), key=sorted
    )
    t_index = {v: i for i, v in enumerate(transient)}
    targets = node_list
    g_index = {v: i for i, v in enumerate(targets)}
    nt, ng = len(transient), len(targets)
    Q = np.zeros((nt, nt))
    B = np.zeros((nt, ng))
    for v in transient:
        for t, p in _out_edges(meta, v):
            if t in t_index:
                Q[t_index[v], t_index[t]] += p
            else:
                B[t_index[v], g_index[t]] += p
    absorb = np.linalg.solve(np.eye(nt) - Q, B) if nt else np.zeros((0, ng))
    edges: dict[tuple[frozenset, frozenset], float] = {}
    rates: dict[tuple[frozenset, frozenset], float] = {}
    for v in sources:
        probs = np.zeros(ng)
        for t, p in _out_edges(meta, v):
            if t in t_index:
                probs += p * absorb[t_index[t]]
            else:
                probs[g_index[t]] += p
        exit_rate = meta.nodes[v].exit.exit_rate
        for j, w in enumerate(targets):
            if probs[j] > 0.0:
                edges[(v, w)] = float(probs[j])
                rates[(v, w)] = float(probs[j]) * exit_rate
    absorbing = tuple(v for v in node_list if meta.nodes[v].stability_degree > L)
    return LScaleGraph(
        level=L,
        nodes=tuple(node_list),
        sources=tuple(sources),
        edges=edges,
        rates=rates,
        absorbing=absorbing,
    )


def l_scale_probability_by_enumeration(
    meta: MetastabilityGraph, L: int, source: frozenset, depth: int
) -> dict[frozenset, float]:
    """Depth-truncated explicit path sum for the collapsed probabilities.

    Slow and truncated (the exact solver sums infinite path families in
    closed form); retained as an independent cross-check.  ``depth`` bounds
    the number of visits to any single intermediate node, so cycles are
    traversed at most ``depth`` times and the missing mass is a geometric
    tail in the cycle's return probability.
    """
    source = frozenset(source)
    out: dict[frozenset, float] = {}
    visits: dict[frozenset, int] = {}

    def walk(v, prob):
        for t, p in _out_edges(meta, v):
            if meta.nodes[t].stability_degree >= L:
                out[t] = out.get(t, 0.0) + prob * p
            elif visits.get(t, 0) < depth:
                visits[t] = visits.get(t, 0) + 1
                walk(t, prob * p)
                visits[t] -= 1

    walk(source, 1.0)
    return out


def sample_jump_chain(
    meta: MetastabilityGraph, start, steps: int, seed
) -> list[JumpStep]:
    """Sample the sequence of configurations with per-step rescaled waiting times.

    Each step's waiting time is exponential with the node's exit rate and
    lives on its own time scale 1/(K mu**L); times at different exponents are
    reported separately, never summed.
    """
    start = frozenset(start)
    if start not in meta.nodes:
        raise ModelError(f"start node {sorted(start)} is not in the graph")
    rng = np.random.default_rng(seed)
    sequence: list[JumpStep] = []
    v = start
    if meta.nodes[v].is_absorbing:
        return sequence
    for _ in range(steps):
        node = meta.nodes[v]
        succ = sorted(_out_edges(meta, v), key=lambda e: sorted(e[0]))
        if node.is_absorbing or not succ:
            sequence.append(JumpStep(v, node.stability_degree, None, True))
            return sequence
        wait = float(rng.exponential(1.0 / node.exit.exit_rate))
        sequence.append(JumpStep(v, node.stability_degree, wait, False))
        probs = np.array([p for _, p in succ])
        choice = rng.choice(len(succ), p=probs / probs.sum())
        v = succ[int(choice)][0]
    return sequence


# ---------------------------------------------------------------------------
# helpers


def _out_edges(meta: MetastabilityGraph, v: frozenset):
    return [(e.target, e.probability) for (s, _), e in meta.edges.items() if s == v]


def _sccs(succ: dict) -> list[list]:
    """Tarjan strongly connected components of a successor map."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    out: list[list] = []
    counter = [0]

    def strongconnect(v):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w in succ.get(v, ()):
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            out.append(comp)

    for v in succ:
        if v not in index:
            strongconnect(v)
    return out


def _label(v: frozenset) -> str:
    return "{" + ",".join(sorted(v)) + "}"
