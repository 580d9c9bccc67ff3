"""Trait-graph model: parameters, validation, graph distances and shortest paths.

The model is a finite directed graph whose vertices are traits.  Each vertex
carries a birth rate ``b(v)``, a natural death rate ``d(v)``, a row of the
competition matrix ``c(v, .)`` and a mutation kernel ``m(v, .)`` supported on
its out-edges.  The exponent ``alpha`` fixes the mutation probability scale
``mu_K = K**(-1/alpha)``.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

from .errors import AssumptionError, ModelError
from .tolerances import DEFAULT as TOL

INF = math.inf


@dataclass(frozen=True)
class MutationPath:
    """A finite path ``(gamma_0, ..., gamma_l)`` along graph edges."""

    vertices: tuple[str, ...]

    def __post_init__(self):
        if len(self.vertices) == 0:
            raise ModelError("a path must contain at least one vertex")

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    @property
    def start(self) -> str:
        return self.vertices[0]

    @property
    def end(self) -> str:
        return self.vertices[-1]

    def __iter__(self):
        return iter(self.vertices)


@dataclass(frozen=True)
class TraitGraphModel:
    """Validated trait graph with demographic and mutation parameters.

    Immutable after construction; all operations on it are pure functions,
    so instances can be shared freely across workers.
    """

    vertices: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    birth: dict[str, float]
    death: dict[str, float]
    competition: dict[str, dict[str, float]]
    mutation: dict[str, dict[str, float]]
    alpha: float
    labels: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self._validate()
        # adjacency caches; object.__setattr__ because the dataclass is frozen
        out = {v: [] for v in self.vertices}
        into = {v: [] for v in self.vertices}
        for (u, w) in sorted(self.edges):
            out[u].append(w)
            into[w].append(u)
        object.__setattr__(self, "_out", out)
        object.__setattr__(self, "_in", into)

    # -- accessors ---------------------------------------------------------

    def b(self, v: str) -> float:
        return self.birth[v]

    def d(self, v: str) -> float:
        return self.death[v]

    def c(self, v: str, w: str) -> float:
        return self.competition[v][w]

    def m(self, v: str, w: str) -> float:
        return self.mutation.get(v, {}).get(w, 0.0)

    def r(self, v: str) -> float:
        """Net growth rate b(v) - d(v) in the absence of competition."""
        return self.birth[v] - self.death[v]

    def out_neighbors(self, v: str) -> list[str]:
        return self._out[v]

    def in_neighbors(self, v: str) -> list[str]:
        return self._in[v]

    def index(self, v: str) -> int:
        return self.vertices.index(v)

    def require_vertex(self, v: str) -> None:
        if v not in self.birth:
            raise ModelError(f"unknown vertex identifier: {v!r}")

    # -- validation --------------------------------------------------------

    def _validate(self):
        names = set(self.vertices)
        if len(names) != len(self.vertices):
            raise ModelError("duplicate vertex identifiers")
        for v in self.vertices:
            if self.birth[v] <= 0:
                raise ModelError(f"birth rate must be positive at {v!r}")
            if self.death[v] < 0:
                raise ModelError(f"death rate must be nonnegative at {v!r}")
            if self.competition[v][v] <= 0:
                raise AssumptionError(
                    f"self-competition c({v},{v}) must be strictly positive"
                )
            for w in self.vertices:
                if self.competition[v][w] < 0:
                    raise ModelError(f"competition c({v},{w}) must be nonnegative")
        for (u, w) in self.edges:
            if u not in names or w not in names:
                raise ModelError(f"edge ({u},{w}) references an undeclared vertex")
        for v in self.vertices:
            kernel = self.mutation.get(v, {})
            if kernel.get(v, 0.0) != 0.0:
                raise AssumptionError(
                    f"mutation kernel must vanish on the diagonal: m({v},{v}) > 0"
                )
            for w, p in kernel.items():
                if p < 0:
                    raise ModelError(f"mutation weight m({v},{w}) must be nonnegative")
                if (p > 0) != ((v, w) in self.edges):
                    raise AssumptionError(
                        f"m({v},{w}) must be positive exactly on edges of the graph"
                    )
            for (u, w) in self.edges:
                if u == v and kernel.get(w, 0.0) <= 0:
                    raise AssumptionError(
                        f"edge ({u},{w}) requires a positive mutation weight"
                    )
            total = sum(kernel.values())
            has_out = any(u == v for (u, _) in self.edges)
            if has_out:
                if abs(total - 1.0) > 1e-12:
                    raise AssumptionError(
                        f"mutation kernel at {v!r} must sum to 1 (got {total})"
                    )
            elif total != 0.0:
                raise AssumptionError(
                    f"vertex {v!r} has no out-edges but a nonzero mutation kernel"
                )
        if self.alpha <= 0:
            raise ModelError("alpha must be positive")
        if abs(self.alpha - round(self.alpha)) <= TOL.integer_alpha:
            raise AssumptionError(
                f"alpha={self.alpha} is too close to an integer; "
                "integer mutation-scale exponents are excluded"
            )

    # -- serialization -----------------------------------------------------

    def to_config(self) -> dict:
        """Round-trippable plain-dict form (the on-disk JSON schema)."""
        edges = []
        for (u, w) in sorted(self.edges):
            edges.append({"from": u, "to": w, "m": self.mutation[u][w]})
        return {
            "vertices": list(self.vertices),
            "edges": edges,
            "birth": {v: self.birth[v] for v in self.vertices},
            "death": {v: self.death[v] for v in self.vertices},
            "competition": {
                v: {w: self.competition[v][w] for w in self.vertices}
                for v in self.vertices
            },
            "alpha": self.alpha,
            **({"labels": dict(self.labels)} if self.labels else {}),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_config(), indent=2, sort_keys=True)


def mu_k(alpha: float, K: float) -> float:
    """Mutation probability K**(-1/alpha)."""
    return K ** (-1.0 / alpha)


# ---------------------------------------------------------------------------
# loading


def load_model(document) -> TraitGraphModel:
    """Build a validated model from a JSON string or an already-parsed dict.

    Undirected edges (``"undirected": true``) expand to both directions; the
    reverse mutation weight defaults to ``m`` and can be overridden with
    ``m_rev``.  Competition accepts a full nested map or ``{"equal": kappa}``.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelError(f"config does not parse as JSON: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise ModelError("config must be a JSON object")
    try:
        vertices = tuple(str(v) for v in doc["vertices"])
        raw_edges = doc["edges"]
        birth = {str(k): float(x) for k, x in doc["birth"].items()}
        death = {str(k): float(x) for k, x in doc["death"].items()}
        comp_doc = doc["competition"]
        alpha = float(doc["alpha"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed config: {exc}") from exc

    names = set(vertices)
    for table, what in ((birth, "birth"), (death, "death")):
        missing = names - set(table)
        if missing:
            raise ModelError(f"{what} rates missing for vertices {sorted(missing)}")
        unknown = set(table) - names
        if unknown:
            raise ModelError(f"{what} rates given for undeclared {sorted(unknown)}")

    edges = set()
    mutation: dict[str, dict[str, float]] = {v: {} for v in vertices}
    for entry in raw_edges:
        u, w = str(entry["from"]), str(entry["to"])
        if u not in names or w not in names:
            raise ModelError(f"edge ({u},{w}) references an undeclared vertex")
        m_fwd = float(entry["m"])
        edges.add((u, w))
        mutation[u][w] = m_fwd
        if entry.get("undirected"):
            m_rev = float(entry.get("m_rev", m_fwd))
            edges.add((w, u))
            mutation[w][u] = m_rev

    if isinstance(comp_doc, dict) and set(comp_doc) == {"equal"}:
        kappa = float(comp_doc["equal"])
        competition = {v: {w: kappa for w in vertices} for v in vertices}
    else:
        competition = {}
        for v in vertices:
            row = comp_doc.get(v)
            if row is None:
                raise ModelError(f"competition row missing for vertex {v!r}")
            competition[v] = {}
            for w in vertices:
                if w not in row:
                    raise ModelError(f"competition entry c({v},{w}) missing")
                competition[v][w] = float(row[w])

    labels = {str(k): str(x) for k, x in doc.get("labels", {}).items()}
    return TraitGraphModel(
        vertices=vertices,
        edges=frozenset(edges),
        birth=birth,
        death=death,
        competition=competition,
        mutation=mutation,
        alpha=alpha,
        labels=labels,
    )


def load_model_file(path) -> TraitGraphModel:
    with open(path, "r", encoding="utf-8") as fh:
        return load_model(fh.read())


# ---------------------------------------------------------------------------
# distances and shortest paths


def graph_distance(model: TraitGraphModel, source, target: str) -> float:
    """Directed shortest-path length from the vertex set ``source`` to ``target``.

    Returns ``math.inf`` when the target is unreachable.
    """
    source = _as_vertex_set(model, source)
    model.require_vertex(target)
    dist = _multi_source_bfs(model, source)
    return dist.get(target, INF)


def distance_map(model: TraitGraphModel, source) -> dict[str, float]:
    """Distances from the vertex set ``source`` to every vertex (inf if unreachable)."""
    source = _as_vertex_set(model, source)
    dist = _multi_source_bfs(model, source)
    return {v: dist.get(v, INF) for v in model.vertices}


def all_pairs_distances(model: TraitGraphModel) -> dict[str, dict[str, float]]:
    return {v: distance_map(model, {v}) for v in model.vertices}


def shortest_paths(model: TraitGraphModel, source, target: str) -> list[MutationPath]:
    """All shortest paths from ``source`` to ``target``, lexicographically ordered."""
    source = _as_vertex_set(model, source)
    model.require_vertex(target)
    dist = _multi_source_bfs(model, source)
    if target not in dist:
        raise ModelError(f"vertex {target!r} is unreachable from {sorted(source)}")

    # walk backwards along the BFS layer structure
    def extend(prefix_rev):
        head = prefix_rev[-1]
        depth = dist[head]
        if depth == 0:
            yield tuple(reversed(prefix_rev))
            return
        for u in model.in_neighbors(head):
            if dist.get(u) == depth - 1:
                yield from extend(prefix_rev + [u])

    paths = sorted(extend([target]))
    return [MutationPath(p) for p in paths]


def _as_vertex_set(model: TraitGraphModel, source) -> frozenset[str]:
    if isinstance(source, str):
        source = {source}
    source = frozenset(source)
    if not source:
        raise ModelError("source vertex set must be nonempty")
    for v in source:
        model.require_vertex(v)
    return source


def _multi_source_bfs(model: TraitGraphModel, source) -> dict[str, int]:
    dist = {v: 0 for v in source}
    queue = deque(sorted(source))
    while queue:
        u = queue.popleft()
        for w in model.out_neighbors(u):
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist
