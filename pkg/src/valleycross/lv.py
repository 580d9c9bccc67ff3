"""Mutation-free competitive dynamics: equilibria, stability, invasion fitness, flow.

For a support ``v`` the interior equilibrium solves the linear system
``sum_w c(v,w) n_w = b(v) - d(v)``.  It is accepted as a coexistence
equilibrium iff all components are strictly positive and the Jacobian
``-diag(n) C`` has all eigenvalue real parts strictly negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import AssumptionError, ModelError, SimulationError
from .model import TraitGraphModel
from .tolerances import DEFAULT as TOL


@dataclass(frozen=True)
class LVEquilibrium:
    """Strictly positive, locally stable coexistence equilibrium on ``support``."""

    support: frozenset[str]
    values: dict[str, float]
    stability_margin: float

    def value(self, v: str) -> float:
        return self.values[v]


@dataclass(frozen=True)
class FitnessProfile:
    """Invasion fitness of every trait against a resident equilibrium."""

    resident: frozenset[str]
    fitness: dict[str, float]


def solve_equilibrium(model: TraitGraphModel, support):
    """Attempt the coexistence equilibrium on ``support``.

    Returns ``(equilibrium, "ok")`` on success, else ``(None, reason)`` with
    reason one of ``"degenerate"``, ``"not-positive"``, ``"unstable"``.
    """
    supp = _support_tuple(model, support)
    n = len(supp)
    C = np.array([[model.c(v, w) for w in supp] for v in supp], dtype=float)
    r = np.array([model.r(v) for v in supp], dtype=float)
    try:
        nbar = np.linalg.solve(C, r)
    except np.linalg.LinAlgError:
        return None, "degenerate"
    if not np.all(np.isfinite(nbar)):
        return None, "degenerate"
    if np.any(nbar <= TOL.equilibrium_positivity):
        return None, "not-positive"
    jac = -np.diag(nbar) @ C
    margin = float(np.max(np.linalg.eigvals(jac).real))
    if margin >= -TOL.stability_margin:
        return None, "unstable"
    values = {v: float(nbar[i]) for i, v in enumerate(supp)}
    return LVEquilibrium(frozenset(supp), values, margin), "ok"


def lv_equilibrium(model: TraitGraphModel, support) -> LVEquilibrium | None:
    """Coexistence equilibrium on ``support``, or None if the support cannot coexist."""
    eq, _ = solve_equilibrium(model, support)
    return eq


def invasion_fitness(
    model: TraitGraphModel,
    equilibrium: LVEquilibrium,
    w: str,
    *,
    check_zero: bool = True,
) -> float:
    """Initial growth rate of a rare ``w`` mutant against the resident equilibrium.

    For resident traits the value is a structural zero (forced by the
    equilibrium equations) and is exempt from the nonzero-fitness check.
    """
    model.require_vertex(w)
    value = model.r(w) - sum(
        model.c(w, v) * equilibrium.values[v] for v in equilibrium.support
    )
    if w in equilibrium.support:
        return value
    if check_zero and abs(value) < TOL.fitness_zero:
        raise AssumptionError(
            f"invasion fitness of {w!r} against {sorted(equilibrium.support)} "
            f"is numerically zero ({value}); fitness must be nonzero"
        )
    return value


def fitness_profile(model: TraitGraphModel, equilibrium: LVEquilibrium) -> FitnessProfile:
    fitness = {
        w: invasion_fitness(model, equilibrium, w) for w in model.vertices
    }
    return FitnessProfile(equilibrium.support, fitness)


@dataclass(frozen=True)
class FlowTrajectory:
    support: tuple[str, ...]
    times: np.ndarray
    densities: np.ndarray  # shape (len(times), len(support))

    def final_state(self) -> dict[str, float]:
        return {v: float(self.densities[-1, i]) for i, v in enumerate(self.support)}

    def final_support(self, threshold: float = TOL.flow_support) -> frozenset[str]:
        return frozenset(
            v for i, v in enumerate(self.support) if self.densities[-1, i] > threshold
        )

    def to_csv(self) -> str:
        header = "t," + ",".join(self.support)
        rows = [
            f"{t!r}," + ",".join(repr(float(x)) for x in row)
            for t, row in zip(self.times, self.densities)
        ]
        return "\n".join([header] + rows) + "\n"


def lv_flow(
    model: TraitGraphModel,
    support,
    initial: dict[str, float],
    horizon: float,
    *,
    samples: int = 200,
) -> FlowTrajectory:
    """Integrate the competitive dynamics on ``support`` up to ``horizon``."""
    supp = _support_tuple(model, support)
    y0 = np.array([float(initial.get(v, 0.0)) for v in supp])
    if np.any(y0 < 0):
        raise ModelError("initial densities must be nonnegative")
    C = np.array([[model.c(v, w) for w in supp] for v in supp], dtype=float)
    r = np.array([model.r(v) for v in supp], dtype=float)

    def rhs(_t, y):
        return (r - C @ y) * y

    def blowup(_t, y):
        return float(np.max(y) - TOL.flow_blowup)

    blowup.terminal = True
    t_eval = np.linspace(0.0, horizon, samples)
    sol = solve_ivp(
        rhs,
        (0.0, horizon),
        y0,
        method="RK45",
        rtol=TOL.ode_rtol,
        atol=TOL.ode_atol,
        t_eval=t_eval,
        events=blowup,
    )
    if sol.status == 1:
        raise SimulationError("density blow-up during flow integration")
    if not sol.success:
        raise SimulationError(f"flow integration failed: {sol.message}")
    return FlowTrajectory(supp, sol.t, sol.y.T)


def _support_tuple(model: TraitGraphModel, support) -> tuple[str, ...]:
    if isinstance(support, str):
        support = {support}
    supp = tuple(v for v in model.vertices if v in set(support))
    if not supp:
        raise ModelError("support must be a nonempty set of known vertices")
    unknown = set(support) - set(supp)
    if unknown:
        raise ModelError(f"unknown vertices in support: {sorted(unknown)}")
    return supp
