"""Deterministic population dynamics on the logarithmic time scale.

On times of order ln K the exponents ``beta_w = log_K(population size)`` of
all trait populations converge to a continuous, piecewise-affine trajectory.
Within an invasion phase with resident set ``v`` each trait's exponent is the
clipped envelope

    beta_w(t) = max_u [ beta_u(phase start) + growth_u(t) - d(u, w)/alpha ]  v  0,

where ``growth_u(t)`` is ``f(u, v)`` times the time elapsed since trait u
first arose in the phase.  A phase ends when a non-resident exponent reaches
1 (invasion); the resident set is then replaced by the stable equilibrium
support of the enlarged macroscopic set.  The construction terminates at a
stable configuration, or early via the degenerate-event criteria (a)-(d).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations

from .errors import ModelError
from .esc import EscDescriptor
from .lv import invasion_fitness, lv_flow, solve_equilibrium
from .model import TraitGraphModel, all_pairs_distances
from .tolerances import DEFAULT as TOL

INF = math.inf

_FLOW_HORIZON = 2000.0
_FLOW_SEED_DENSITY = 1e-3


@dataclass(frozen=True)
class Phase:
    """One invasion phase: affine envelope terms between two invasion times."""

    index: int
    t_start: float
    t_end: float  # math.inf for a final stationary phase
    residents: frozenset[str]
    # per source trait: (exponent at phase start, growth start time, slope)
    sources: dict[str, tuple[float, float, float]]
    birth_times: dict[str, float]


@dataclass(frozen=True)
class Termination:
    """How the log-time construction ended.

    ``kind`` is one of ``esc_reached``, ``criterion_a`` (simultaneous
    invasions), ``criterion_b`` (no unique stable equilibrium),
    ``criterion_c`` (extinction exactly at an invasion time),
    ``criterion_d`` (trait birth exactly at an invasion time), ``horizon``
    (phase cap exceeded).
    """

    kind: str
    time: float
    resident: frozenset[str] | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "time": None if self.time == INF else self.time,
            "resident": sorted(self.resident) if self.resident is not None else None,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class BetaTrajectory:
    """Piecewise-affine exponent trajectories with phase bookkeeping."""

    phases: tuple[Phase, ...]
    termination: Termination
    final_beta: dict[str, float]
    breakpoints: tuple[tuple[float, dict[str, float]], ...]
    alpha: float
    distances: dict[str, dict[str, float]]
    metadata: dict = field(default_factory=dict)

    def beta_at(self, t: float) -> dict[str, float]:
        """Exact envelope evaluation at an arbitrary time."""
        if not self.phases:
            return dict(self.final_beta)
        phase = self.phases[-1]
        for p in self.phases:
            if p.t_start <= t <= p.t_end:
                phase = p
                break
        return {
            w: _envelope(phase.sources, self.distances, self.alpha, w, t)
            for w in self.distances
        }

    def residents_at(self, t: float) -> frozenset[str]:
        for p in self.phases:
            if p.t_start <= t <= p.t_end:
                return p.residents
        return self.phases[-1].residents if self.phases else frozenset()

    def to_csv(self) -> str:
        traits = sorted(self.distances)
        header = "t," + ",".join(traits)
        rows = []
        for t, beta in self.breakpoints:
            rows.append(f"{t!r}," + ",".join(repr(beta[w]) for w in traits))
        return "\n".join([header] + rows) + "\n"

    def to_dict(self) -> dict:
        return {
            "phases": [
                {
                    "index": p.index,
                    "t_start": p.t_start,
                    "t_end": None if p.t_end == INF else p.t_end,
                    "residents": sorted(p.residents),
                    "birth_times": {w: p.birth_times[w] for w in sorted(p.birth_times)},
                }
                for p in self.phases
            ],
            "termination": self.termination.to_dict(),
            "final_beta": {w: self.final_beta[w] for w in sorted(self.final_beta)},
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def run_lnk(
    model: TraitGraphModel,
    initial_beta: dict[str, float],
    *,
    max_phases: int = TOL.max_phases,
) -> BetaTrajectory:
    """Run the log-time-scale construction from an initial exponent profile.

    Traits absent from ``initial_beta`` start at exponent 0.  The traits at
    exponent 1 form the initial macroscopic set; their stable equilibrium
    support becomes the first resident set.
    """
    dist = all_pairs_distances(model)
    alpha = model.alpha
    tie = TOL.event_tie
    tilde: dict[str, float] = {}
    for w, x in initial_beta.items():
        model.require_vertex(w)
        if not 0.0 <= x <= 1.0:
            raise ModelError(f"initial exponent of {w!r} must lie in [0, 1], got {x}")
    for v in model.vertices:
        tilde[v] = float(initial_beta.get(v, 0.0))
    macro = frozenset(v for v in model.vertices if tilde[v] == 1.0)
    if not macro:
        raise ModelError("at least one trait must start at exponent 1")

    # order-1 spreading of the initial profile to mutation neighbours
    beta = {
        w: max(
            0.0,
            max(
                tilde[u] - dist[u][w] / alpha
                for u in model.vertices
                if dist[u][w] < INF
            ),
        )
        for w in model.vertices
    }
    metadata = {
        "stability_certificate": "local eigenvalue test plus finite-horizon flow check",
        "flow_checks": [],
    }
    residents, eq = _stable_support(model, macro)
    if residents is None:
        return BetaTrajectory(
            phases=(),
            termination=Termination(
                "criterion_b", 0.0, detail="initial macroscopic set"
            ),
            final_beta=beta,
            breakpoints=((0.0, dict(beta)),),
            alpha=alpha,
            distances=dist,
            metadata=metadata,
        )
    for u in residents:
        beta[u] = 1.0

    phases: list[Phase] = []
    breakpoints: list[tuple[float, dict[str, float]]] = [(0.0, dict(beta))]
    t = 0.0
    for index in range(max_phases):
        sources: dict[str, list[float]] = {}
        for u in model.vertices:
            slope = 0.0 if u in residents else invasion_fitness(model, eq, u)
            start = t if beta[u] > 0.0 else INF
            sources[u] = [beta[u], start, slope]
        birth_times: dict[str, float] = {}
        # traits whose parent already sits exactly at the mutation threshold
        for w in model.vertices:
            if sources[w][1] == INF:
                for u in model.in_neighbors(w):
                    if (
                        _envelope(sources, dist, alpha, u, t)
                        >= 1.0 / alpha - tie
                    ):
                        sources[w][1] = t
                        birth_times[w] = t
                        break

        outcome = _run_phase(
            model, eq, residents, sources, birth_times, dist, alpha, t, breakpoints
        )
        if outcome[0] == "stationary":
            final_beta, settle = outcome[1], outcome[2]
            phases.append(
                Phase(index, t, INF, residents, _freeze(sources), dict(birth_times))
            )
            if settle > t:
                breakpoints.append((settle, dict(final_beta)))
            return BetaTrajectory(
                phases=tuple(phases),
                termination=Termination("esc_reached", settle, residents),
                final_beta=final_beta,
                breakpoints=tuple(breakpoints),
                alpha=alpha,
                distances=dist,
                metadata=metadata,
            )
        if outcome[0] == "terminate":
            term: Termination = outcome[1]
            s_end = term.time
            phases.append(
                Phase(index, t, s_end, residents, _freeze(sources), dict(birth_times))
            )
            beta_end = {
                w: min(
                    1.0, _envelope(sources, dist, alpha, w, s_end)
                )
                for w in model.vertices
            }
            breakpoints.append((s_end, beta_end))
            return BetaTrajectory(
                phases=tuple(phases),
                termination=term,
                final_beta=beta_end,
                breakpoints=tuple(breakpoints),
                alpha=alpha,
                distances=dist,
                metadata=metadata,
            )
        # invasion
        _, s_l, invader = outcome
        phases.append(
            Phase(index, t, s_l, residents, _freeze(sources), dict(birth_times))
        )
        beta = {
            w: min(1.0, _envelope(sources, dist, alpha, w, s_l))
            for w in model.vertices
        }
        beta[invader] = 1.0
        for u in residents:
            beta[u] = 1.0
        breakpoints.append((s_l, dict(beta)))
        enlarged = residents | {invader}
        new_residents, new_eq = _stable_support(model, enlarged)
        if new_residents is None:
            return _terminated(
                phases, breakpoints, beta,
                Termination(
                    "criterion_b", s_l,
                    detail=f"no unique stable support in {sorted(enlarged)}",
                ),
                alpha, dist, metadata,
            )
        flow_ok = _flow_check(model, enlarged, eq, invader, new_residents)
        metadata["flow_checks"].append(
            {"time": s_l, "macroscopic": sorted(enlarged), "passed": flow_ok}
        )
        if not flow_ok:
            return _terminated(
                phases, breakpoints, beta,
                Termination(
                    "criterion_b", s_l,
                    detail=f"flow check failed for {sorted(enlarged)}",
                ),
                alpha, dist, metadata,
            )
        residents, eq = new_residents, new_eq
        for u in residents:
            beta[u] = 1.0
        t = s_l
    return _terminated(
        phases, breakpoints, beta,
        Termination("horizon", t, residents, detail=f"{max_phases} phases exceeded"),
        alpha, dist, metadata,
    )


def esc_after_fixation(model: TraitGraphModel, esc: EscDescriptor, w: str):
    """Resident set reached after mutant ``w`` fixates, or the early termination.

    The initial exponents are 1 for the residents and ``min(1/alpha, 1)`` for
    the fixating mutant (for ``alpha < 1`` the mutant is immediately
    macroscopic, giving one-step trait substitution).
    """
    if w not in esc.mutant_candidates:
        raise ModelError(
            f"trait {w!r} is not a mutant candidate of {sorted(esc.resident)}"
        )
    tilde = {u: 1.0 for u in esc.resident}
    tilde[w] = min(1.0 / model.alpha, 1.0)
    trajectory = run_lnk(model, tilde)
    if trajectory.termination.kind == "esc_reached":
        return trajectory.termination.resident
    return trajectory.termination


# ---------------------------------------------------------------------------
# phase machinery


def _run_phase(model, eq, residents, sources, birth_times, dist, alpha, t, breakpoints):
    """Advance one phase event by event.

    Returns ("invasion", s_l, invader), ("terminate", Termination) or
    ("stationary", final_beta, settle_time).
    """
    tie = TOL.event_tie
    tcur = t
    while True:
        inv_times = {
            w: _cross_up(sources, dist, alpha, w, 1.0, tcur)
            for w in model.vertices
            if w not in residents
        }
        t_inv = min(inv_times.values(), default=INF)
        birth_candidates = {
            w: _birth_time(model, sources, dist, alpha, w, tcur)
            for w in model.vertices
            if sources[w][1] == INF
        }
        t_birth = min(birth_candidates.values(), default=INF)
        if t_inv == INF and t_birth == INF:
            final_beta, settle = _stationary_limit(model, sources, dist, alpha, tcur)
            return ("stationary", final_beta, settle)
        if t_birth < t_inv - tie:
            for w, tb in birth_candidates.items():
                if tb <= t_birth + tie:
                    sources[w][1] = tb
                    birth_times[w] = tb
            breakpoints.append(
                (
                    t_birth,
                    {
                        w: _envelope(sources, dist, alpha, w, t_birth)
                        for w in model.vertices
                    },
                )
            )
            tcur = t_birth
            continue
        s_l = t_inv
        if abs(t_birth - s_l) <= tie:
            which = sorted(w for w, tb in birth_candidates.items() if abs(tb - s_l) <= tie)
            return (
                "terminate",
                Termination(
                    "criterion_d", s_l,
                    detail=f"trait birth coincides with invasion: {which}",
                ),
            )
        invaders = sorted(w for w, ti in inv_times.items() if ti <= s_l + tie)
        if len(invaders) > 1:
            return (
                "terminate",
                Termination(
                    "criterion_a", s_l,
                    detail=f"simultaneous invasions: {invaders}",
                ),
            )
        dying = _extinctions_at(model, residents, invaders, sources, dist, alpha, s_l)
        if dying:
            return (
                "terminate",
                Termination(
                    "criterion_c", s_l,
                    detail=f"extinction at invasion time: {dying}",
                ),
            )
        return ("invasion", s_l, invaders[0])


def _envelope(sources, dist, alpha, w, t) -> float:
    best = 0.0
    for u, (b0, start, slope) in sources.items():
        d = dist[u][w]
        if d == INF:
            continue
        val = b0 - d / alpha
        if start < INF and t > start:
            val += slope * (t - start)
        if val > best:
            best = val
    return best


def _cross_up(sources, dist, alpha, w, level, tcur) -> float:
    """First strictly future time the envelope of ``w`` reaches ``level``."""
    tie = TOL.event_tie
    best = INF
    for u, (b0, start, slope) in sources.items():
        d = dist[u][w]
        if d == INF or slope <= 0.0 or start == INF:
            continue
        base = b0 - d / alpha
        tc = start + (level - base) / slope
        if tc > tcur + tie and tc < best:
            best = tc
    return best


def _birth_time(model, sources, dist, alpha, w, tcur) -> float:
    """First time an in-neighbour of the unborn trait ``w`` reaches 1/alpha."""
    level = 1.0 / alpha
    best = INF
    for u in model.in_neighbors(w):
        if _envelope(sources, dist, alpha, u, tcur) >= level - TOL.event_tie:
            return tcur
        tc = _cross_up(sources, dist, alpha, u, level, tcur)
        if tc < best:
            best = tc
    return best


def _extinctions_at(model, residents, invaders, sources, dist, alpha, s_l) -> list[str]:
    """Living non-residents whose envelope hits zero exactly at the invasion time."""
    tie = TOL.event_tie
    dying = []
    for w in model.vertices:
        if w in residents or w in invaders:
            continue
        if _envelope(sources, dist, alpha, w, s_l) > tie:
            continue
        for u, (b0, start, slope) in sources.items():
            d = dist[u][w]
            if d == INF or slope >= 0.0 or start == INF or start >= s_l:
                continue
            val = b0 - d / alpha + slope * (s_l - start)
            if abs(val) <= tie:
                dying.append(w)
                break
    return sorted(dying)


def _stationary_limit(model, sources, dist, alpha, tcur):
    """Long-time limit of the envelope once no further event is pending.

    With no pending invasion every born source has nonpositive slope, so the
    negative-slope terms vanish and the limit is the maximum over the constant
    terms.  Also returns the time after which nothing moves any more.
    """
    final = {}
    settle = tcur
    for w in model.vertices:
        best = 0.0
        for u, (b0, start, slope) in sources.items():
            d = dist[u][w]
            if d == INF:
                continue
            base = b0 - d / alpha
            if start == INF or slope == 0.0:
                if base > best:
                    best = base
        final[w] = best
        for u, (b0, start, slope) in sources.items():
            d = dist[u][w]
            if d == INF or slope >= 0.0 or start == INF:
                continue
            base = b0 - d / alpha
            if base > final[w]:
                # time when this decaying term drops to the limiting value
                tq = start + (base - final[w]) / (-slope)
                if tq > settle:
                    settle = tq
    return final, settle


def _stable_support(model, macro):
    """Unique stable equilibrium support within a macroscopic trait set.

    A subset qualifies when it carries an accepted equilibrium against which
    every other macroscopic trait is unfit.  Anything but exactly one
    qualifying subset reports failure (no unique stable configuration).
    """
    macro = sorted(macro)
    accepted = []
    for k in range(1, len(macro) + 1):
        for combo in combinations(macro, k):
            eq, _ = solve_equilibrium(model, combo)
            if eq is None:
                continue
            if all(
                invasion_fitness(model, eq, u, check_zero=False) < 0.0
                for u in macro
                if u not in combo
            ):
                accepted.append((frozenset(combo), eq))
    if len(accepted) == 1:
        return accepted[0]
    return None, None


def _flow_check(model, enlarged, old_eq, invader, expected) -> bool:
    """Integrate the competitive flow from the invasion state as a global
    attractivity spot check of the selected support."""
    initial = {v: old_eq.values.get(v, 0.0) for v in enlarged}
    initial[invader] = max(initial.get(invader, 0.0), _FLOW_SEED_DENSITY)
    try:
        flow = lv_flow(model, enlarged, initial, _FLOW_HORIZON)
    except Exception:
        return False
    return flow.final_support() == frozenset(expected)


def _freeze(sources) -> dict[str, tuple[float, float, float]]:
    return {u: tuple(vals) for u, vals in sources.items()}


def _terminated(phases, breakpoints, beta, term, alpha, dist, metadata):
    return BetaTrajectory(
        phases=tuple(phases),
        termination=term,
        final_beta=dict(beta),
        breakpoints=tuple(breakpoints),
        alpha=alpha,
        distances=dist,
        metadata=metadata,
    )
