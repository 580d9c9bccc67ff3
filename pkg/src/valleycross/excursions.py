"""Birth-count statistics of subcritical single-trait excursions.

While a mutant trait is unfit against the current residents, its lineage
behaves like a subcritical branching process.  Conditioned on eventual
extinction, the total number of birth events during one excursion has the
probability mass ``p(k) = (2k)!/(k!(k+1)!) * rho**k * (1-rho)**(k+1)`` where
``rho`` is the birth fraction of the per-capita event rate.  The mean number
of birth events per excursion drives the effective traversal speed across
unfit intermediate traits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ModelError
from .lv import LVEquilibrium
from .model import TraitGraphModel
from .tolerances import DEFAULT as TOL


def birth_fraction(model: TraitGraphModel, equilibrium: LVEquilibrium, w: str) -> float:
    """Fraction of per-capita events of trait ``w`` that are births.

    ``rho = b / (b + d + sum_v c(w,v) nbar_v)``; subcriticality (negative
    invasion fitness) is equivalent to ``rho < 1/2``.
    """
    model.require_vertex(w)
    b = model.b(w)
    total = b + model.d(w) + sum(
        model.c(w, v) * equilibrium.values[v] for v in equilibrium.support
    )
    return b / total


def excursion_pmf(rho: float, k: int) -> float:
    """Probability that one excursion contains exactly ``k`` birth events."""
    _check_rho(rho)
    if k < 0:
        raise ModelError("birth count must be nonnegative")
    # (2k)! / (k! (k+1)!) rho^k (1-rho)^(k+1), evaluated in log space
    log_cat = math.lgamma(2 * k + 1) - math.lgamma(k + 1) - math.lgamma(k + 2)
    if rho == 0.0:
        return 1.0 if k == 0 else 0.0
    return math.exp(log_cat + k * math.log(rho) + (k + 1) * math.log(1.0 - rho))


def expected_births(rho: float, *, term_tol: float = TOL.series_term) -> float:
    """Mean number of birth events per excursion, ``sum_k k p(k)``.

    The series ``sum_{l>=1} (2l)!/((l-1)!(l+1)!) rho^l (1-rho)^(l+1)`` is
    summed directly until the current term falls below ``term_tol``; the
    term ratio tends to ``4 rho (1-rho) < 1``, so the tail after truncation
    is bounded by a convergent geometric series.
    """
    _check_rho(rho)
    if rho == 0.0:
        return 0.0
    total = 0.0
    log_rho = math.log(rho)
    log_q = math.log(1.0 - rho)
    for ell in range(1, 100000):
        log_coef = math.lgamma(2 * ell + 1) - math.lgamma(ell) - math.lgamma(ell + 2)
        term = math.exp(log_coef + ell * log_rho + (ell + 1) * log_q)
        total += term
        if term < term_tol:
            ratio = 4.0 * rho * (1.0 - rho)
            if ratio < 1.0 and term * ratio / (1.0 - ratio) < term_tol:
                break
    return total


@dataclass(frozen=True)
class ExcursionLaw:
    """Birth-count law of a single unfit trait against a resident equilibrium."""

    trait: str
    rho: float
    mean_births: float

    def pmf(self, k: int) -> float:
        return excursion_pmf(self.rho, k)


def excursion_law(
    model: TraitGraphModel, equilibrium: LVEquilibrium, w: str
) -> ExcursionLaw:
    rho = birth_fraction(model, equilibrium, w)
    if rho >= 0.5:
        raise ModelError(
            f"trait {w!r} is not subcritical against {sorted(equilibrium.support)} "
            f"(birth fraction {rho} >= 1/2)"
        )
    return ExcursionLaw(w, rho, expected_births(rho))


def _check_rho(rho: float) -> None:
    if not 0.0 <= rho < 0.5:
        raise ModelError(f"birth fraction must lie in [0, 1/2), got {rho}")
