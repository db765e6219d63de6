"""Multi-way contingency tables, their margins, and move application.

Cells are addressed by 0-based coordinate tuples ``(i_1, ..., i_r)``; the flat
``counts`` tuple stores them with rater 1 varying slowest (numpy C order on a
``(k,) * r`` array). Raters are also 0-based: ``margin(table, 0)`` is the
row margin of a two-way table.
"""
import itertools
import operator
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, MoveRejectedError, NegativeCountError


def _as_count(value):
    try:
        count = operator.index(value)
    except TypeError:
        raise NegativeCountError(f'Counts must be nonnegative integers, got {value!r}') from None
    if count < 0:
        raise NegativeCountError(f'Counts must be nonnegative, got {count}')
    return count


def cell_index(cell, levels):
    """Flat position of ``cell`` in rater-1-slowest order."""
    index = 0
    for coordinate in cell:
        index = index * levels + coordinate
    return index


def cell_of(index, raters, levels):
    """Inverse of :func:`cell_index`."""
    cell = []
    for _ in range(raters):
        index, coordinate = divmod(index, levels)
        cell.append(coordinate)
    return tuple(reversed(cell))


def all_cells(raters, levels):
    return list(itertools.product(range(levels), repeat=raters))


def rater_pairs(raters):
    return list(itertools.combinations(range(raters), 2))


@dataclass(frozen=True)
class MarginVector:
    """The one-way margins of every rater, in rater order."""

    margins: tuple

    def __post_init__(self):
        margins = tuple(tuple(_as_count(c) for c in margin) for margin in self.margins)
        if len(margins) < 2:
            raise DimensionError('A margin vector needs at least two raters')
        levels = len(margins[0])
        if any(len(margin) != levels for margin in margins):
            raise DimensionError('All raters must have the same number of levels')
        totals = {sum(margin) for margin in margins}
        if len(totals) != 1:
            raise DimensionError(f'Margins must all sum to the same total, got {sorted(totals)}')
        object.__setattr__(self, 'margins', margins)

    @property
    def raters(self):
        return len(self.margins)

    @property
    def levels(self):
        return len(self.margins[0])

    @property
    def total(self):
        return sum(self.margins[0])

    def __iter__(self):
        return iter(self.margins)

    def __getitem__(self, rater):
        return self.margins[rater]

    def to_list(self):
        return [list(margin) for margin in self.margins]


@dataclass(frozen=True)
class Table:
    """
    Dense nonnegative-integer contingency table with ``raters`` dimensions of
    ``levels`` categories each. Immutable; moves produce new tables.
    """

    raters: int
    levels: int
    counts: tuple
    total: int = field(init=False, compare=False)

    def __post_init__(self):
        if self.raters < 2:
            raise DimensionError(f'A table needs at least 2 raters, got {self.raters}')
        if self.levels < 2:
            raise DimensionError(f'A table needs at least 2 levels, got {self.levels}')
        counts = tuple(_as_count(c) for c in self.counts)
        expected = self.levels ** self.raters
        if len(counts) != expected:
            raise DimensionError(
                f'Expected {expected} counts for {self.raters} raters and {self.levels} levels, '
                f'got {len(counts)}'
            )
        object.__setattr__(self, 'counts', counts)
        object.__setattr__(self, 'total', sum(counts))

    @property
    def shape(self):
        return (self.levels,) * self.raters

    @property
    def cell_count(self):
        return len(self.counts)

    def as_array(self):
        """A fresh ``(k,) * r`` integer array; mutating it does not touch the table."""
        return np.array(self.counts, dtype=np.int64).reshape(self.shape)

    def count(self, cell):
        self._check_cell(cell)
        return self.counts[cell_index(cell, self.levels)]

    def nested(self):
        """Counts as nested lists (rows of the two-way table when r = 2)."""
        return self.as_array().tolist()

    def _check_cell(self, cell):
        if len(cell) != self.raters or any(not 0 <= c < self.levels for c in cell):
            raise DimensionError(f'Cell {cell} is outside a {"x".join(map(str, self.shape))} table')

    def _check_rater(self, rater):
        if not 0 <= rater < self.raters:
            raise DimensionError(f'Rater index {rater} out of range for {self.raters} raters')


def new_table(raters, levels, counts):
    """
    Build a validated table.

    Args:
        raters: number of raters r (>= 2)
        levels: number of categories k (>= 2)
        counts: flat iterable of k**r nonnegative integers, rater 1 slowest

    Returns:
        Table with cached total
    """
    return Table(raters, levels, tuple(counts))


def table_from_array(array):
    """Build a table from a nested list or array of shape ``(k,) * r``."""
    array = np.asarray(array)
    if array.ndim < 2 or len(set(array.shape)) != 1:
        raise DimensionError(f'Expected a hypercubic array, got shape {array.shape}')
    if array.size and not np.issubdtype(array.dtype, np.integer):
        raise NegativeCountError('Counts must be nonnegative integers')
    return Table(array.ndim, array.shape[0], tuple(int(c) for c in array.ravel()))


def zero_table(raters, levels):
    return Table(raters, levels, (0,) * levels ** raters)


def margin(table, rater):
    """One-way marginal counts of ``rater`` (0-based); sums to N."""
    table._check_rater(rater)
    axes = tuple(a for a in range(table.raters) if a != rater)
    return tuple(int(c) for c in table.as_array().sum(axis=axes))


def pair_margin(table, u, v):
    """
    Two-way marginal table of raters ``u < v`` (0-based).

    Returns:
        k x k numpy array with rater ``u`` on the rows
    """
    table._check_rater(u)
    table._check_rater(v)
    if u == v:
        raise DimensionError('A pair margin needs two distinct raters')
    if u > v:
        raise DimensionError(f'Pair margin expects u < v, got ({u}, {v})')
    axes = tuple(a for a in range(table.raters) if a not in (u, v))
    return table.as_array().sum(axis=axes)


def fiber_statistic(table):
    """All one-way margins in rater order: the statistic that defines the fiber."""
    array = table.as_array()
    margins = []
    for rater in range(table.raters):
        axes = tuple(a for a in range(table.raters) if a != rater)
        margins.append(tuple(int(c) for c in array.sum(axis=axes)))
    return MarginVector(tuple(margins))


@dataclass(frozen=True)
class Move:
    """
    Sparse integer table in the kernel of the margin map.

    ``entries`` holds ``(cell, value)`` pairs for the nonzero cells, sorted by
    cell. Every one-way margin of a move is zero, so adding it to a table keeps
    the table in its fiber.
    """

    raters: int
    levels: int
    entries: tuple

    def __post_init__(self):
        merged = {}
        for cell, value in self.entries:
            cell = tuple(int(c) for c in cell)
            if len(cell) != self.raters or any(not 0 <= c < self.levels for c in cell):
                raise DimensionError(f'Move cell {cell} outside the {self.raters}-way, {self.levels}-level table')
            merged[cell] = merged.get(cell, 0) + operator.index(value)
        entries = tuple(sorted((cell, value) for cell, value in merged.items() if value))
        object.__setattr__(self, 'entries', entries)

        for rater in range(self.raters):
            if any(self._margin(rater)):
                raise DimensionError(f'Not a move: margin of rater {rater} is not zero')

    @classmethod
    def zero(cls, raters, levels):
        return cls(raters, levels, ())

    def _margin(self, rater):
        totals = [0] * self.levels
        for cell, value in self.entries:
            totals[cell[rater]] += value
        return totals

    @property
    def is_zero(self):
        return not self.entries

    @property
    def plus_cells(self):
        return tuple(cell for cell, value in self.entries if value > 0)

    @property
    def minus_cells(self):
        return tuple(cell for cell, value in self.entries if value < 0)

    def value(self, cell):
        for c, value in self.entries:
            if c == cell:
                return value
        return 0

    def negated(self):
        return Move(self.raters, self.levels, tuple((cell, -value) for cell, value in self.entries))

    def flat_entries(self):
        """``(flat index, value)`` pairs, for fast application to count lists."""
        return tuple((cell_index(cell, self.levels), value) for cell, value in self.entries)

    def dense(self):
        array = np.zeros((self.levels,) * self.raters, dtype=np.int64)
        for cell, value in self.entries:
            array[cell] = value
        return array

    def project(self, u, v):
        """Two-way margin of the move on raters ``(u, v)``, itself a two-way move."""
        return Move(2, self.levels, tuple(((cell[u], cell[v]), value) for cell, value in self.entries))

    def to_dict(self):
        return {
            'plus': [list(cell) for cell in self.plus_cells],
            'minus': [list(cell) for cell in self.minus_cells],
        }


def _check_move_shape(table, move):
    if (move.raters, move.levels) != (table.raters, table.levels):
        raise DimensionError(
            f'Move for {move.raters} raters/{move.levels} levels does not fit a table with '
            f'{table.raters} raters/{table.levels} levels'
        )


def can_apply(table, move):
    """True when ``table + move`` has no negative cell."""
    _check_move_shape(table, move)
    counts = table.counts
    return all(counts[index] + value >= 0 for index, value in move.flat_entries())


def apply_move(table, move):
    """
    Return ``table + move``.

    Raises:
        MoveRejectedError: when a cell would become negative; ``table`` is unchanged
        DimensionError: when the move was built for another table shape
    """
    _check_move_shape(table, move)
    counts = list(table.counts)
    for index, value in move.flat_entries():
        counts[index] += value
        if counts[index] < 0:
            raise MoveRejectedError(f'Move would make cell {cell_of(index, table.raters, table.levels)} negative')
    return Table(table.raters, table.levels, tuple(counts))
