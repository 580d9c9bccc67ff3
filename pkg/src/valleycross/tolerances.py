"""Central numeric tolerances.

All hard-coded thresholds used by the analysis modules live here so that
they can be inspected (and, in tests, referenced) in one place.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # rejection band around integer values of the mutation-scale exponent
    integer_alpha: float = 1e-9
    # strict positivity threshold for equilibrium components
    equilibrium_positivity: float = 1e-10
    # stability margin: max real part of Jacobian eigenvalues must be below -this
    stability_margin: float = 1e-10
    # relative residual allowed when checking equilibrium equations
    equilibrium_residual: float = 1e-10
    # invasion fitness values below this magnitude are treated as a violation
    # of the nonzero-fitness assumption
    fitness_zero: float = 1e-9
    # ODE integration
    ode_rtol: float = 1e-8
    ode_atol: float = 1e-12
    # densities below this are dropped from the support reported by the flow
    flow_support: float = 1e-6
    # density blow-up guard for the flow integrator
    flow_blowup: float = 1e12
    # series truncation for the excursion birth-count mean
    series_term: float = 1e-14
    # tie tolerance for simultaneous events in the log-time dynamics
    event_tie: float = 1e-9
    # cap on the number of invasion phases in the log-time dynamics
    max_phases: int = 1000
    # total-rate overflow guard in the stochastic simulator
    rate_overflow: float = 1e15


DEFAULT = Tolerances()
