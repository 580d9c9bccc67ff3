"""Metastable adaptive dynamics on finite trait graphs.

Closed-form analysis of stable resident configurations, valley-crossing
rates and multi-scale jump chains, together with an exact stochastic
simulator and a Monte Carlo validation harness.
"""

__version__ = "0.1.0"

from .errors import (
    AssumptionError,
    EscRejection,
    ModelError,
    SimulationError,
    ValleycrossError,
)
from .esc import (
    EscDescriptor,
    certify_esc,
    equilibrium_prefactors,
    mutant_candidates,
    mutation_neighbourhood,
    stability_degree,
)
from .excursions import (
    ExcursionLaw,
    birth_fraction,
    excursion_law,
    excursion_pmf,
    expected_births,
)
from .lnk import BetaTrajectory, Termination, esc_after_fixation, run_lnk
from .lv import (
    FitnessProfile,
    LVEquilibrium,
    fitness_profile,
    invasion_fitness,
    lv_equilibrium,
    lv_flow,
    solve_equilibrium,
)
from .metagraph import (
    LScaleGraph,
    MetastabilityGraph,
    build_l_scale_graph,
    build_meta_graph,
    check_no_cycles,
    l_scale_probability_by_enumeration,
    sample_jump_chain,
)
from .model import (
    MutationPath,
    TraitGraphModel,
    all_pairs_distances,
    distance_map,
    graph_distance,
    load_model,
    load_model_file,
    mu_k,
    shortest_paths,
)
from .rates import ExitLaw, PathRateBreakdown, exit_law, path_rate, pathwise_arrival_rate, trait_rate
from .simulator import (
    PopulationState,
    SimulationRecord,
    StopCondition,
    detect_t_esc,
    detect_t_fix,
    esc_initial_counts,
    simulate,
)
from .tolerances import DEFAULT as TOLERANCES
from .tolerances import Tolerances
from .validation import (
    ValidationReport,
    compare_lnk,
    estimate_exit_law,
    estimate_mutant_arrivals,
    exit_law_trend,
    trait_arrival_rate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
