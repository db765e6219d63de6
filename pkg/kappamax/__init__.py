"""Weighted kappa, its maximum over tables with fixed margins, and the Markov-basis machinery behind it."""
from .agreement import (
    KappaValue, agreement_delta, agreement_report, cohen_kappa, disagreement_shift, expected_agreement,
    observed_agreement, weighted_kappa,
)
from .anneal import AnnealConfig, AnnealResult, acceptance_probability, anneal_max_kappa, anneal_restarts, diagonal_sweep
from .errors import KappamaxError
from .fiber import (
    FiberSummary, connectivity_check, cross_scheme_range, enumerate_fiber, level_set_count, max_kappa_exhaustive,
    summarize_fiber,
)
from .markov import (
    BasicMove, MarkovBasis, diagonal_moves, markov_basis, multi_way_basis, pair_projection, random_move,
    two_way_basis,
)
from .simstudy import Scenario, ScenarioStats, default_profiles, run_scenario, sample_table, study_grid
from .table import (
    MarginVector, Move, Table, apply_move, can_apply, fiber_statistic, margin, new_table, pair_margin,
    table_from_array,
)
from .weights import (
    DisagreementScheme, custom_scheme, identity_scheme, is_distance, linear_scheme, quadratic_scheme, sqrt_scheme,
)

__version__ = '0.1.0'
