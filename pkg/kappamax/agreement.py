"""Observed/expected agreement and the kappa indices built on them.

With disagreement weights u the weighted kappa of a table with N
observations is

    kappa = 1 - N * D / E

where D sums u over the cells of every pair margin and E sums u over the
outer products of the matching one-way margins. For two raters there is one
pair and this is Cohen's weighted kappa. For r > 2 it is the weighted Conger
kappa, where averaging over the r(r-1)/2 pairs cancels out. E depends on the
one-way margins only, so it is constant on a fiber.
"""
import functools
import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DimensionError, KappaUndefinedError, SchemeError
from .table import all_cells, fiber_statistic, pair_margin, rater_pairs
from .weights import identity_scheme

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KappaValue:
    value: float
    exact: Fraction = None

    @property
    def display(self):
        return f'{self.value:.4f}'

    def to_dict(self):
        return {
            'value': self.value,
            'display': self.display,
            'exact': None if self.exact is None else f'{self.exact.numerator}/{self.exact.denominator}',
        }


def _check_scheme(levels, scheme):
    if scheme.levels != levels:
        raise DimensionError(f'Scheme has {scheme.levels} levels, the table has {levels}')


def _check_total(total):
    if total <= 0:
        raise KappaUndefinedError('Agreement is undefined for an empty table (N = 0)')


@functools.lru_cache(maxsize=64)
def cell_weights(raters, levels, scheme):
    """
    Integer disagreement weight of every cell, in flat order.

    The weight of cell (i_1, ..., i_r) is the sum over rater pairs (a, b) of the
    integer-form u[i_a][i_b], so that ``sum(weight * count)`` is D in integer
    units.

    Returns:
        (tuple of ints, denominator, exact flag)
    """
    _check_scheme(levels, scheme)
    numerators, denominator, exact = scheme.integer_form()
    pairs = rater_pairs(raters)
    weights = tuple(
        sum(numerators[cell[a]][cell[b]] for a, b in pairs)
        for cell in all_cells(raters, levels)
    )
    return weights, denominator, exact


def disagreement_numerator(table, scheme):
    """D in integer units: sum of integer-form weights times counts over all pair margins."""
    weights, _, _ = cell_weights(table.raters, table.levels, scheme)
    return sum(w * c for w, c in zip(weights, table.counts))


def expected_disagreement_numerator(margins, scheme):
    """
    E in integer units, from the one-way margins alone.

    Args:
        margins: MarginVector of the table (the fiber statistic)
        scheme: DisagreementScheme with matching levels
    """
    _check_scheme(margins.levels, scheme)
    numerators, _, _ = scheme.integer_form()
    u = np.array(numerators, dtype=object)
    total = 0
    for a, b in rater_pairs(margins.raters):
        outer = np.outer(np.array(margins[a], dtype=object), np.array(margins[b], dtype=object))
        total += int((u * outer).sum())
    return total


def kappa_from_disagreement(disagreement, margins, scheme):
    """
    Kappa of any fiber table whose integer disagreement is ``disagreement``.

    Raises:
        KappaUndefinedError: empty fiber or expected agreement equal to 1
    """
    total = margins.total
    _check_total(total)
    expected = expected_disagreement_numerator(margins, scheme)
    if expected == 0:
        raise KappaUndefinedError('Kappa is undefined: expected agreement equals 1')
    if scheme.exact:
        exact = 1 - Fraction(total * disagreement, expected)
        return KappaValue(float(exact), exact)
    return KappaValue(1.0 - total * disagreement / expected)


def _pair_sums(table, weights):
    """Per-pair (observed, expected) weighted sums as proportions."""
    n = table.total
    sums = []
    for a, b in rater_pairs(table.raters):
        joint = pair_margin(table, a, b) / n
        outer = np.outer(joint.sum(axis=1), joint.sum(axis=0))
        sums.append((float((weights * joint).sum()), float((weights * outer).sum())))
    return sums


def observed_agreement(table, scheme):
    """
    Observed weighted agreement A_o: (1/N) sum w_ij n_ij for two raters, the
    average of that over all pair margins otherwise.

    Raises:
        KappaUndefinedError: N = 0
    """
    _check_scheme(table.levels, scheme)
    _check_total(table.total)
    sums = _pair_sums(table, scheme.agreement_matrix())
    return sum(observed for observed, _ in sums) / len(sums)


def expected_agreement(table, scheme):
    """Chance agreement A_e from the one-way margins, averaged over rater pairs."""
    _check_scheme(table.levels, scheme)
    _check_total(table.total)
    sums = _pair_sums(table, scheme.agreement_matrix())
    return sum(expected for _, expected in sums) / len(sums)


def weighted_kappa(table, scheme):
    """
    Weighted kappa (Conger's weighted kappa when r > 2).

    The exact field is populated for schemes with a rational form.

    Raises:
        KappaUndefinedError: N = 0, or expected agreement equal to 1 (all mass of
            every pair of margins in one common category)
    """
    _check_scheme(table.levels, scheme)
    _check_total(table.total)
    margins = fiber_statistic(table)
    if scheme.exact:
        return kappa_from_disagreement(disagreement_numerator(table, scheme), margins, scheme)

    if expected_disagreement_numerator(margins, scheme) == 0:
        raise KappaUndefinedError('Kappa is undefined: expected agreement equals 1')
    sums = _pair_sums(table, scheme.matrix())
    observed = sum(o for o, _ in sums)
    expected = sum(e for _, e in sums)
    return KappaValue(1.0 - observed / expected)


def cohen_kappa(table):
    """Unweighted Cohen's kappa of a two-rater table."""
    if table.raters != 2:
        raise DimensionError(f"Cohen's kappa needs a two-rater table, got {table.raters} raters")
    return weighted_kappa(table, identity_scheme(table.levels))


def disagreement_shift(move, scheme):
    """Change of D, in integer units, caused by adding ``move``."""
    weights, _, _ = cell_weights(move.raters, move.levels, scheme)
    return sum(weights[index] * value for index, value in move.flat_entries())


def agreement_delta(move, scheme, total, exact=False):
    """
    Change in observed agreement caused by adding ``move`` to any table of size N.

    Only the nonzero cells of the move are read. For r > 2 the contribution of a
    cell is the sum over its two-way projections, so the result equals the
    average of the deltas of the projected two-way moves.

    Args:
        move: Move (basic or general) with the scheme's number of levels
        scheme: DisagreementScheme
        total: table size N
        exact: return a Fraction instead of a float (rational schemes only)

    Returns:
        A_o(n + m) - A_o(n)
    """
    _check_scheme(move.levels, scheme)
    _check_total(total)
    pairs = len(rater_pairs(move.raters))
    if exact:
        if not scheme.exact:
            raise SchemeError(f'The {scheme.kind} scheme has no exact form')
        numerators = scheme.rational_form.numerators
        shift = sum(
            value * sum(numerators[cell[a]][cell[b]] for a, b in rater_pairs(move.raters))
            for cell, value in move.entries
        )
        return -Fraction(shift, scheme.rational_form.denominator * total * pairs)

    shift = sum(
        value * sum(scheme.u[cell[a]][cell[b]] for a, b in rater_pairs(move.raters))
        for cell, value in move.entries
    )
    return -shift / (total * pairs)


def agreement_report(table, scheme):
    """Observed agreement, expected agreement and kappa in one JSON-ready mapping."""
    kappa = weighted_kappa(table, scheme)
    report = {
        'scheme': scheme.kind,
        'observed_agreement': observed_agreement(table, scheme),
        'expected_agreement': expected_agreement(table, scheme),
    }
    report.update(kappa.to_dict())
    return report
