"""Tests for the simulated annealing search."""
import math

import numpy as np
import pytest

from kappamax.agreement import weighted_kappa
from kappamax.anneal import (
    AnnealConfig, acceptance_probability, anneal_max_kappa, anneal_restarts, diagonal_sweep, restart_seeds,
)
from kappamax.errors import ConfigError, KappaUndefinedError
from kappamax.fiber import max_kappa_exhaustive
from kappamax.markov import two_way_basis
from kappamax.table import fiber_statistic, new_table, table_from_array
from kappamax.weights import linear_scheme, quadratic_scheme, sqrt_scheme
from tests.conftest import LINEAR_MAX_A, MOVE_EXAMPLE_N

QUICK = AnnealConfig(stop_c=300, seed=3)

# maxima over the fiber of the 4x4 example, from exhaustive enumeration
MAX_LINEAR = 0.7511
MAX_QUADRATIC = 0.8703
MAX_SQRT = 0.7528


@pytest.mark.parametrize('kwargs', [
    {'tau0': 0},
    {'tau0': -1.0},
    {'decay': 1.0},
    {'decay': 0.0},
    {'stop_c': 0},
    {'stop_c': 100, 'max_steps': 50},
])
def test_config_validation(kwargs):
    """Test that out-of-range annealing parameters raise ConfigError."""
    with pytest.raises(ConfigError):
        AnnealConfig(**kwargs)


def test_config_defaults_from_basis_size():
    """Test stop_c = max(10 * basis size, 1000) and max_steps = max(100 * stop_c, 10^6)."""
    assert AnnealConfig().resolve(36) == (1000, 1_000_000)
    assert AnnealConfig().resolve(441) == (4410, 1_000_000)
    assert AnnealConfig().resolve(7500) == (75000, 7_500_000)
    assert AnnealConfig(stop_c=20).resolve(7500) == (20, 1_000_000)


def test_config_rejects_max_steps_below_default_stop():
    """Test that an explicit max_steps below the derived stop_c is refused."""
    with pytest.raises(ConfigError):
        AnnealConfig(max_steps=500).resolve(36)


def test_acceptance_probability():
    """Test min(exp(delta / tau), 1)."""
    assert acceptance_probability(0.0, 0.5) == 1.0
    assert acceptance_probability(0.2, 0.5) == 1.0
    assert acceptance_probability(-0.1, 0.1) == pytest.approx(math.exp(-1))
    assert acceptance_probability(-0.1, 1e-6) == pytest.approx(0.0)


def test_acceptance_probability_needs_positive_temperature():
    """Test that tau must be positive."""
    with pytest.raises(ConfigError):
        acceptance_probability(-0.1, 0.0)


def test_diagonal_sweep_two_raters():
    """Test that the sweep only uses off-diagonal cells that have a mirror partner."""
    table = table_from_array([[1, 2, 0], [1, 0, 0], [3, 0, 1]])
    swept = diagonal_sweep(table)
    assert swept.nested() == [[2, 1, 0], [0, 1, 0], [3, 0, 1]]
    assert fiber_statistic(swept) == fiber_statistic(table)


def test_diagonal_sweep_reaches_fixed_point():
    """Test that no diagonal move applies after a sweep and agreement did not drop."""
    table = table_from_array([[0, 2, 1], [2, 0, 1], [1, 1, 0]])
    swept = diagonal_sweep(table, quadratic_scheme(3))
    array = swept.as_array()
    for i in range(3):
        for j in range(i + 1, 3):
            assert min(array[i, j], array[j, i]) == 0
    assert weighted_kappa(swept, quadratic_scheme(3)).value > weighted_kappa(table, quadratic_scheme(3)).value


def test_diagonal_sweep_three_raters():
    """Test the sweep on a three-rater table with two complementary cells."""
    counts = [0] * 8
    counts[0b011] = 1
    counts[0b100] = 1
    swept = diagonal_sweep(new_table(3, 2, counts))
    assert swept.count((0, 0, 0)) == 1
    assert swept.count((1, 1, 1)) == 1
    assert swept.total == 2


def test_anneal_improves_and_stays_in_fiber(ratings_4x4):
    """Test that the result is in the fiber and at least as good as the start."""
    for scheme, maximum in ((linear_scheme(4), MAX_LINEAR), (quadratic_scheme(4), MAX_QUADRATIC)):
        result = anneal_max_kappa(ratings_4x4, scheme, QUICK)
        assert fiber_statistic(result.best_table) == fiber_statistic(ratings_4x4)
        assert result.best_kappa.value >= result.initial_kappa.value
        assert result.best_kappa.value <= maximum + 5e-5
        assert result.best_kappa == weighted_kappa(result.best_table, scheme)


def test_anneal_is_reproducible(ratings_4x4):
    """Test that a fixed seed gives identical runs."""
    first = anneal_max_kappa(ratings_4x4, sqrt_scheme(4), QUICK)
    second = anneal_max_kappa(ratings_4x4, sqrt_scheme(4), QUICK)
    assert first == second


def test_anneal_stopping_by_stagnation(ratings_4x4):
    """Test that the chain stops exactly stop_c steps after the last change."""
    result = anneal_max_kappa(ratings_4x4, quadratic_scheme(4), QUICK)
    assert result.stopped_by == 'stagnation'
    assert result.steps_total == result.steps_last_change + 300
    assert result.steps_total >= result.stop_c == 300
    assert result.max_steps == 1_000_000
    assert 0 < result.accepted_moves <= result.steps_total


def test_anneal_stopping_by_max_steps(ratings_4x4):
    """Test that max_steps caps the number of steps."""
    result = anneal_max_kappa(ratings_4x4, quadratic_scheme(4), AnnealConfig(stop_c=100, max_steps=100))
    assert result.steps_total == 100


def test_anneal_max_steps_across_draw_blocks(ratings_4x4):
    """Test a step cap that is not a multiple of the draw block."""
    config = AnnealConfig(stop_c=5000, max_steps=5000, tau0=50.0, decay=0.99999)
    result = anneal_max_kappa(ratings_4x4, linear_scheme(4), config)
    assert result.steps_total == 5000


def test_anneal_finds_small_fiber_maximum():
    """Test that the search finds the identity in the 3x3 permutation fiber."""
    table = table_from_array([[0, 0, 1], [1, 0, 0], [0, 1, 0]])
    result = anneal_max_kappa(table, quadratic_scheme(3), AnnealConfig(stop_c=1000))
    assert result.best_table.nested() == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    assert result.best_kappa.exact == 1


def test_anneal_with_explicit_basis(ratings_4x4):
    """Test that passing the basis gives the same run as building it."""
    result = anneal_max_kappa(ratings_4x4, linear_scheme(4), QUICK, basis=two_way_basis(4))
    assert result == anneal_max_kappa(ratings_4x4, linear_scheme(4), QUICK)


def test_anneal_three_raters(three_rater_table):
    """Test a three-rater run stays in the fiber and does not lose agreement."""
    result = anneal_max_kappa(three_rater_table, quadratic_scheme(3), AnnealConfig(stop_c=500, seed=1))
    assert fiber_statistic(result.best_table) == fiber_statistic(three_rater_table)
    assert result.best_kappa.value >= result.initial_kappa.value
    assert result.stop_c == 500


def test_anneal_degenerate_table():
    """Test that a table without defined kappa is refused."""
    with pytest.raises(KappaUndefinedError):
        anneal_max_kappa(table_from_array([[0, 0], [0, 7]]), linear_scheme(2), QUICK)


def test_anneal_result_to_dict(ratings_4x4):
    """Test the JSON form of a result."""
    data = anneal_max_kappa(ratings_4x4, linear_scheme(4), QUICK).to_dict()
    assert set(data) == {
        'best_kappa', 'initial_kappa', 'best_table', 'steps_total', 'steps_last_change',
        'accepted_moves', 'seed', 'stop_c', 'max_steps', 'stopped_by',
    }
    assert data['initial_kappa']['display'] == '0.5023'
    assert data['seed'] == 3


def test_restart_seeds():
    """Test that one chain keeps the seed and several chains get distinct reproducible seeds."""
    assert restart_seeds(7, 1) == [7]
    seeds = restart_seeds(7, 4)
    assert len(set(seeds)) == 4
    assert seeds == restart_seeds(7, 4)
    with pytest.raises(ConfigError):
        restart_seeds(7, 0)


def test_restarts_keep_the_best_chain(ratings_4x4):
    """Test that the best chain is the earliest one with the highest kappa."""
    best, results = anneal_restarts(ratings_4x4, quadratic_scheme(4), AnnealConfig(stop_c=200), restarts=3)
    assert len(results) == 3
    top = max(r.best_kappa.exact for r in results)
    assert best.best_kappa.exact == top
    assert best is next(r for r in results if r.best_kappa.exact == top)
    assert [r.seed for r in results] == restart_seeds(0, 3)


@pytest.mark.slow
@pytest.mark.parametrize('scheme, maximum', [
    (linear_scheme(4), MAX_LINEAR),
    (quadratic_scheme(4), MAX_QUADRATIC),
    (sqrt_scheme(4), MAX_SQRT),
])
def test_restarts_reach_fiber_maximum(ratings_4x4, scheme, maximum):
    """Test that default-length chains reach the exhaustive maximum of the 4x4 example."""
    best, _ = anneal_restarts(ratings_4x4, scheme, AnnealConfig(seed=11), restarts=5)
    assert best.best_kappa.value == pytest.approx(maximum, abs=5e-5)


def test_diagonal_sweep_examples():
    """Test the sweep on a 2x2 swap, a diagonal table and a table without mirrored pairs."""
    assert diagonal_sweep(table_from_array([[0, 1], [1, 0]])).nested() == [[1, 0], [0, 1]]
    diagonal = table_from_array([[3, 0, 0], [0, 1, 0], [0, 0, 2]])
    assert diagonal_sweep(diagonal) == diagonal
    n = table_from_array(MOVE_EXAMPLE_N)
    assert diagonal_sweep(n) == n


def test_anneal_from_fiber_maximum():
    """Test that a table already at the maximum keeps its kappa."""
    table = table_from_array(LINEAR_MAX_A)
    result = anneal_max_kappa(table, quadratic_scheme(4), QUICK)
    assert result.best_kappa.exact == result.initial_kappa.exact
    assert result.best_kappa.value == pytest.approx(MAX_QUADRATIC, abs=5e-5)


@pytest.mark.slow
def test_single_chains_reach_quadratic_maximum(ratings_4x4):
    """Test that default chains on 20 seeds all reach the quadratic maximum."""
    for seed in range(20):
        result = anneal_max_kappa(ratings_4x4, quadratic_scheme(4), AnnealConfig(seed=seed))
        assert result.best_kappa.value == pytest.approx(MAX_QUADRATIC, abs=5e-5), f'seed {seed}'


def random_instances(count, rng):
    """Small random tables whose fibers can be enumerated."""
    instances = []
    while len(instances) < count:
        if rng.random() < 0.5:
            raters, levels, size = 2, int(rng.integers(3, 5)), int(rng.integers(8, 21))
        else:
            raters, levels, size = 3, 3, int(rng.integers(6, 11))
        counts = rng.multinomial(size, [1 / levels ** raters] * levels ** raters)
        table = new_table(raters, levels, [int(c) for c in counts])
        scheme = (quadratic_scheme, linear_scheme, sqrt_scheme)[int(rng.integers(3))](levels)
        try:
            weighted_kappa(table, scheme)
        except KappaUndefinedError:
            continue
        instances.append((table, scheme))
    return instances


@pytest.mark.slow
def test_anneal_matches_exhaustive_maximum():
    """Test that default annealing reaches the enumerated maximum on at least 99% of runs."""
    rng = np.random.default_rng(2024)
    runs = hits = 0
    misses = []
    for table, scheme in random_instances(100, rng):
        maximum, _ = max_kappa_exhaustive(table, scheme)
        for seed in range(5):
            result = anneal_max_kappa(table, scheme, AnnealConfig(seed=seed))
            runs += 1
            if result.best_kappa.value >= maximum.value - 1e-9:
                hits += 1
            else:
                misses.append((table.counts, scheme.kind, seed, result.best_kappa.value, maximum.value))
    assert hits >= 0.99 * runs, misses
