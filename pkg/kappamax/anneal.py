"""Simulated annealing for the maximum-agreement table of a fiber.

Each step draws a signed basic move uniformly. A move that would make a cell
negative is rejected; otherwise it is accepted with probability
``min(exp((A_o(n') - A_o(n)) / tau), 1)``, with ``tau = tau0 * decay**step``.
Every step cools the temperature, rejected or not. The run stops after
``stop_c`` consecutive steps without a change in observed agreement, or at
``max_steps``. The best table visited then goes through the diagonal sweep.
"""
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .agreement import cell_weights, disagreement_shift, weighted_kappa
from .errors import ConfigError
from .markov import diagonal_moves, markov_basis, signed_move
from .table import Table, rater_pairs

logger = logging.getLogger(__name__)

MIN_STOP_C = 1000
# Random draws are generated in blocks of this many steps
DRAW_BLOCK = 4096


@dataclass(frozen=True)
class AnnealConfig:
    tau0: float = 1.0
    decay: float = 0.999
    stop_c: int = None
    max_steps: int = None
    seed: int = 0

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ConfigError(f'tau0 must be positive, got {self.tau0}')
        if not 0 < self.decay < 1:
            raise ConfigError(f'decay must be in (0, 1), got {self.decay}')
        if self.stop_c is not None and self.stop_c < 1:
            raise ConfigError(f'stop_c must be at least 1, got {self.stop_c}')
        if self.stop_c is not None and self.max_steps is not None and self.max_steps < self.stop_c:
            raise ConfigError(f'max_steps ({self.max_steps}) must be at least stop_c ({self.stop_c})')

    def resolve(self, basis_size):
        """
        Fill in the size-dependent defaults.

        Returns:
            (stop_c, max_steps) where stop_c defaults to max(10 * basis size, 1000)
            and max_steps to max(100 * stop_c, 1,000,000)
        """
        stop_c = self.stop_c if self.stop_c is not None else max(10 * basis_size, MIN_STOP_C)
        max_steps = self.max_steps if self.max_steps is not None else max(100 * stop_c, 1_000_000)
        if max_steps < stop_c:
            raise ConfigError(f'max_steps ({max_steps}) must be at least stop_c ({stop_c})')
        return stop_c, max_steps

    def to_dict(self):
        return {
            'tau0': self.tau0,
            'decay': self.decay,
            'stop_c': self.stop_c,
            'max_steps': self.max_steps,
            'seed': self.seed,
        }


@dataclass(frozen=True)
class AnnealResult:
    best_table: Table
    best_kappa: object
    initial_kappa: object
    steps_total: int
    steps_last_change: int
    accepted_moves: int
    seed: int
    stop_c: int
    max_steps: int
    stopped_by: str

    def to_dict(self):
        return {
            'best_kappa': self.best_kappa.to_dict(),
            'initial_kappa': self.initial_kappa.to_dict(),
            'best_table': self.best_table.nested(),
            'steps_total': self.steps_total,
            'steps_last_change': self.steps_last_change,
            'accepted_moves': self.accepted_moves,
            'seed': self.seed,
            'stop_c': self.stop_c,
            'max_steps': self.max_steps,
            'stopped_by': self.stopped_by,
        }


def acceptance_probability(delta, tau):
    """
    min(exp(delta / tau), 1).

    Args:
        delta: change in observed agreement caused by the move
        tau: current temperature, > 0
    """
    if not tau > 0:
        raise ConfigError(f'Temperature must be positive, got {tau}')
    if delta >= 0:
        return 1.0
    return math.exp(delta / tau)


def _sweep_counts(counts, moves):
    changed = True
    while changed:
        changed = False
        for entries in moves:
            while all(counts[index] + value >= 0 for index, value in entries):
                for index, value in entries:
                    counts[index] += value
                changed = True
    return counts


def diagonal_sweep(table, scheme=None):
    """
    Apply every diagonal move as long as it fits, until none does.

    Each application moves two observations onto the diagonal, so observed
    agreement never decreases and the loop terminates. ``scheme`` is only
    used for the debug log.
    """
    moves = [move.flat_entries() for move in diagonal_moves(table.raters, table.levels)]
    counts = _sweep_counts(list(table.counts), moves)
    swept = Table(table.raters, table.levels, tuple(counts))
    if scheme is not None and swept != table:
        logger.debug('Diagonal sweep changed the table: kappa %s -> %s',
                     weighted_kappa(table, scheme).display, weighted_kappa(swept, scheme).display)
    return swept


def anneal_max_kappa(table, scheme, config=None, basis=None):
    """
    Search the fiber of ``table`` for a table of maximum kappa.

    Args:
        table: starting Table with N > 0
        scheme: DisagreementScheme
        config: AnnealConfig, defaults apply when omitted
        basis: MarkovBasis for the table's shape, built when omitted

    Returns:
        AnnealResult; deterministic for a given config seed

    Raises:
        KappaUndefinedError: the starting table is degenerate
    """
    config = config or AnnealConfig()
    initial_kappa = weighted_kappa(table, scheme)
    basis = basis or markov_basis(table.raters, table.levels)
    stop_c, max_steps = config.resolve(basis.size)

    weights, denominator, _ = cell_weights(table.raters, table.levels, scheme)
    # A_o(n') - A_o(n) = -shift / scale
    scale = denominator * table.total * len(rater_pairs(table.raters))
    signed = []
    for draw in range(2 * basis.size):
        move = signed_move(basis, draw)
        signed.append((move.flat_entries(), disagreement_shift(move, scheme)))

    rng = np.random.default_rng(config.seed)
    counts = list(table.counts)
    key = sum(w * c for w, c in zip(weights, counts))
    best_key, best_counts = key, tuple(counts)
    tau = config.tau0
    stagnant = accepted = last_change = 0
    step = 0
    stopped_by = 'max_steps'

    while step < max_steps:
        draws = rng.integers(0, len(signed), size=DRAW_BLOCK)
        uniforms = rng.random(size=DRAW_BLOCK)
        for draw, uniform in zip(draws.tolist(), uniforms.tolist()):
            step += 1
            tau *= config.decay
            entries, shift = signed[draw]
            if all(counts[index] + value >= 0 for index, value in entries):
                if shift <= 0:
                    accept = True
                elif tau > 0:
                    accept = uniform < acceptance_probability(-shift / scale, tau)
                else:
                    accept = False
                if accept:
                    for index, value in entries:
                        counts[index] += value
                    key += shift
                    accepted += 1
                    if key < best_key:
                        best_key, best_counts = key, tuple(counts)
            else:
                accept = False

            if accept and shift != 0:
                stagnant = 0
                last_change = step
            else:
                stagnant += 1
            if stagnant >= stop_c:
                stopped_by = 'stagnation'
                break
            if step >= max_steps:
                break
        if stopped_by == 'stagnation':
            break

    best_table = diagonal_sweep(Table(table.raters, table.levels, best_counts), scheme)
    best_kappa = weighted_kappa(best_table, scheme)
    logger.info('Annealing (seed %s) stopped by %s after %s steps: kappa %s -> %s',
                config.seed, stopped_by, step, initial_kappa.display, best_kappa.display)
    return AnnealResult(
        best_table, best_kappa, initial_kappa, step, last_change, accepted,
        config.seed, stop_c, max_steps, stopped_by,
    )


def restart_seeds(seed, restarts):
    """Independent integer seeds for ``restarts`` chains; one chain keeps ``seed`` itself."""
    if restarts < 1:
        raise ConfigError(f'restarts must be at least 1, got {restarts}')
    if restarts == 1:
        return [seed]
    children = np.random.SeedSequence(seed).spawn(restarts)
    return [int(child.generate_state(1)[0]) for child in children]


def anneal_restarts(table, scheme, config=None, restarts=1):
    """
    Run independent chains and keep the best.

    Ties on kappa go to the earliest chain, so the outcome does not depend on
    how the chains are scheduled.

    Returns:
        (best AnnealResult, list of every chain's AnnealResult)
    """
    config = config or AnnealConfig()
    basis = markov_basis(table.raters, table.levels)
    weights, _, _ = cell_weights(table.raters, table.levels, scheme)

    results = []
    best, best_key = None, None
    for seed in restart_seeds(config.seed, restarts):
        result = anneal_max_kappa(table, scheme, replace(config, seed=seed), basis)
        results.append(result)
        key = sum(w * c for w, c in zip(weights, result.best_table.counts))
        if best is None or key < best_key:
            best, best_key = result, key
    logger.info('Best of %s restarts: kappa %s (seed %s)', restarts, best.best_kappa.display, best.seed)
    return best, results
