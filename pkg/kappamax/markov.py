"""Basic moves and the Markov bases they form.

A basic move has +1 on two cells ``a``, ``b`` that differ in a set D of at
least two coordinates, and -1 on the two cells obtained by exchanging the
coordinates of a subset S of D between them. S and D - S give the same move
up to sign, and S = D gives the zero move, so each pair of cells contributes
2^(|D| - 1) - 1 moves. For two raters this is the usual 2x2 swap
(+1 at (i, j), (i', j'), -1 at (i, j'), (i', j)).

Bases store each move once, in canonical orientation (the smallest cell
carries +1); the sign is attached when sampling.
"""
import functools
import itertools
import logging
from dataclasses import dataclass

from .errors import DimensionError, EmptyBasisError
from .table import Move, all_cells

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BasicMove(Move):
    """A move with exactly four nonzero cells, two at +1 and two at -1."""

    def __post_init__(self):
        super().__post_init__()
        values = sorted(value for _, value in self.entries)
        if values != [-1, -1, 1, 1]:
            raise DimensionError(f'A basic move has two +1 and two -1 cells, got values {values}')
        a, b = self.plus_cells
        differing = sum(x != y for x, y in zip(a, b))
        required = 2 if self.raters > 2 else self.raters
        if differing < required:
            raise DimensionError(f'The +1 cells {a} and {b} differ in only {differing} coordinates')

    def negated(self):
        return BasicMove(self.raters, self.levels, tuple((cell, -value) for cell, value in self.entries))

    @property
    def is_canonical(self):
        return self.entries[0][1] > 0

    def canonical(self):
        return self if self.is_canonical else self.negated()


def basic_move(plus_cells, minus_cells, levels):
    """
    Build a basic move from its +1 and -1 cells.

    Args:
        plus_cells: two cell tuples receiving +1
        minus_cells: two cell tuples receiving -1
        levels: number of categories k
    """
    cells = list(plus_cells) + list(minus_cells)
    if len(cells) != 4 or len(set(map(tuple, cells))) != 4:
        raise DimensionError('A basic move needs four distinct cells')
    raters = len(cells[0])
    entries = tuple((tuple(c), 1) for c in plus_cells) + tuple((tuple(c), -1) for c in minus_cells)
    return BasicMove(raters, levels, entries)


def _moves_for_pair(a, b, levels):
    """All moves with +1 on ``a`` and ``b``, one per S up to complement."""
    differing = [axis for axis, (x, y) in enumerate(zip(a, b)) if x != y]
    if len(differing) < 2:
        return
    rest = differing[1:]
    # S never contains the first differing axis, which picks one of S and D - S
    for size in range(1, len(rest) + 1):
        for subset in itertools.combinations(rest, size):
            c = list(a)
            d = list(b)
            for axis in subset:
                c[axis], d[axis] = b[axis], a[axis]
            yield BasicMove(len(a), levels, ((a, 1), (b, 1), (tuple(c), -1), (tuple(d), -1))).canonical()


@dataclass(frozen=True)
class MarkovBasis:
    """
    Finite set of basic moves connecting every fiber of a given shape.

    Moves are unique up to sign; ``size`` is the number of unsigned moves.
    """

    raters: int
    levels: int
    moves: tuple

    def __post_init__(self):
        seen = set()
        for move in self.moves:
            if (move.raters, move.levels) != (self.raters, self.levels):
                raise DimensionError(f'Move {move.to_dict()} does not fit a {self.raters}-rater, {self.levels}-level basis')
            key = move.canonical().entries
            if key in seen:
                raise DimensionError(f'Duplicate move (up to sign) in basis: {move.to_dict()}')
            seen.add(key)
        object.__setattr__(self, '_keys', frozenset(seen))

    @property
    def size(self):
        return len(self.moves)

    def __len__(self):
        return len(self.moves)

    def __iter__(self):
        return iter(self.moves)

    def __getitem__(self, index):
        return self.moves[index]

    def contains(self, move):
        """Membership up to sign."""
        if (move.raters, move.levels) != (self.raters, self.levels):
            return False
        try:
            canonical = BasicMove(move.raters, move.levels, move.entries).canonical()
        except DimensionError:
            return False
        return canonical.entries in self._keys

    def to_dict(self, include_moves=False):
        data = {'raters': self.raters, 'levels': self.levels, 'size': self.size}
        if include_moves:
            data['moves'] = [move.to_dict() for move in self.moves]
        return data


def _check_levels(levels):
    if not isinstance(levels, int) or levels < 2:
        raise DimensionError(f'A basis needs at least 2 levels, got {levels!r}')


@functools.lru_cache(maxsize=None)
def two_way_basis(levels):
    """
    The C(k, 2)^2 basic moves of the two-rater problem.

    Returns:
        MarkovBasis ordered by (i, i', j, j')
    """
    _check_levels(levels)
    moves = []
    for i, i2 in itertools.combinations(range(levels), 2):
        for j, j2 in itertools.combinations(range(levels), 2):
            moves.append(basic_move([(i, j), (i2, j2)], [(i, j2), (i2, j)], levels))
    basis = MarkovBasis(2, levels, tuple(moves))
    logger.debug('Two-way basis for k=%s: %s moves', levels, basis.size)
    return basis


def enumerate_basic_moves(raters, levels):
    """
    Every basic move for ``raters`` >= 2, unique up to sign, in generation order.

    Pairs of cells are taken in lexicographic order; a move already produced
    from its -1 pair is skipped.
    """
    if raters < 2:
        raise DimensionError(f'Basic moves need at least 2 raters, got {raters}')
    _check_levels(levels)
    moves = {}
    for a, b in itertools.combinations(all_cells(raters, levels), 2):
        for move in _moves_for_pair(a, b, levels):
            moves.setdefault(move.entries, move)
    return tuple(moves.values())


@functools.lru_cache(maxsize=None)
def multi_way_basis(raters, levels):
    """Markov basis of basic moves for three or more raters."""
    if raters < 3:
        raise DimensionError(f'multi_way_basis needs at least 3 raters, got {raters}; use two_way_basis')
    basis = MarkovBasis(raters, levels, enumerate_basic_moves(raters, levels))
    logger.info('Multi-way basis for r=%s, k=%s: %s moves', raters, levels, basis.size)
    return basis


def markov_basis(raters, levels):
    if raters == 2:
        return two_way_basis(levels)
    return multi_way_basis(raters, levels)


def diagonal_moves(raters, levels):
    """
    Basis moves whose +1 cells are the diagonal cells (i, ..., i) and (j, ..., j).

    Applying one moves two observations onto the diagonal, which raises the
    observed agreement under every scheme.
    """
    if raters < 2:
        raise DimensionError(f'Diagonal moves need at least 2 raters, got {raters}')
    _check_levels(levels)
    moves = []
    for i, j in itertools.combinations(range(levels), 2):
        moves.extend(_moves_for_pair((i,) * raters, (j,) * raters, levels))
    return moves


def pair_projection(move, u, v):
    """
    Margin of ``move`` on raters ``u < v``.

    For a basic move this is either a two-way basic move or the zero move,
    depending on whether the four projected cells stay distinct.

    Returns:
        BasicMove, or ``Move.zero(2, k)`` for a null projection; a general Move
        when ``move`` itself is not basic and projects to something else
    """
    if not 0 <= u < v < move.raters:
        raise DimensionError(f'Pair ({u}, {v}) is not valid for {move.raters} raters')
    projected = move.project(u, v)
    if projected.is_zero:
        return Move.zero(2, move.levels)
    try:
        return BasicMove(2, move.levels, projected.entries)
    except DimensionError:
        return projected


def signed_move(basis, draw):
    """Map ``draw`` in [0, 2 * size) to a signed basis move: even draws keep the stored sign."""
    move = basis.moves[draw >> 1]
    return move.negated() if draw & 1 else move


def random_move(basis, rng):
    """
    Uniform draw over basis moves times {+1, -1}.

    Args:
        basis: nonempty MarkovBasis
        rng: numpy Generator owned by the caller

    Raises:
        EmptyBasisError: the basis has no moves
    """
    if not basis.size:
        raise EmptyBasisError('Cannot draw a move from an empty basis')
    return signed_move(basis, int(rng.integers(2 * basis.size)))
