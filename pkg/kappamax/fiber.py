"""Exhaustive enumeration of fibers: every nonnegative table with given one-way margins.

The walk assigns cells depth-first. At each cell the admissible counts are
bounded above by the remaining budget of every slice through the cell, and
below by what the later cells of each slice can still absorb. Each table
carries integer disagreement keys (one per scheme) that are accumulated as
cells are assigned, so kappa comparisons during the walk are exact integer
comparisons.
"""
import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from multiprocessing import Pool

from . import config
from .agreement import cell_weights, disagreement_numerator, kappa_from_disagreement, weighted_kappa
from .errors import DimensionError, FiberTooLargeError
from .markov import signed_move
from .table import MarginVector, Table, cell_of, fiber_statistic, rater_pairs

logger = logging.getLogger(__name__)


def _as_margins(margins):
    if isinstance(margins, MarginVector):
        return margins
    return MarginVector(tuple(tuple(m) for m in margins))


def _plan(raters, levels, order):
    """Per position: (flat index, cell, per-axis list of (other axis, later values in the slice))."""
    cells = [cell_of(index, raters, levels) for index in order]
    plan = []
    for position, cell in enumerate(cells):
        later = cells[position + 1:]
        bounds = []
        for a in range(raters):
            in_slice = [c for c in later if c[a] == cell[a]]
            bounds.append(tuple(
                (b, tuple(sorted({c[b] for c in in_slice})))
                for b in range(raters) if b != a
            ))
        plan.append((order[position], cell, tuple(bounds)))
    return plan


def _check_order(order, cell_count):
    if order is None:
        return list(range(cell_count))
    order = list(order)
    if sorted(order) != list(range(cell_count)):
        raise DimensionError(f'Cell order must be a permutation of 0..{cell_count - 1}')
    return order


def _count_range(remaining, cell, bounds):
    hi = min(remaining[a][cell[a]] for a in range(len(cell)))
    lo = 0
    for a, others in enumerate(bounds):
        capacity = min(sum(remaining[b][w] for w in values) for b, values in others)
        lo = max(lo, remaining[a][cell[a]] - capacity)
    return lo, hi


def _walk(margins, weight_vectors, visitor, budget, order=None, first_value=None):
    """
    Depth-first walk over the fiber.

    Args:
        margins: MarginVector
        weight_vectors: sequence of per-cell integer weight tuples; the visitor
            receives one accumulated key per vector
        visitor: callable(counts tuple, keys tuple)
        budget: maximum number of visited nodes
        order: permutation of flat cell indices, default flat order
        first_value: restrict the first cell to this count

    Returns:
        (number of tables, number of visited nodes)
    """
    raters, levels = margins.raters, margins.levels
    cell_count = levels ** raters
    plan = _plan(raters, levels, _check_order(order, cell_count))
    remaining = [list(m) for m in margins]
    counts = [0] * cell_count
    keys = [0] * len(weight_vectors)
    scheme_range = range(len(weight_vectors))
    axes = range(raters)
    state = {'tables': 0, 'nodes': 0}

    def descend(position):
        if position == cell_count:
            state['tables'] += 1
            visitor(tuple(counts), tuple(keys))
            return
        index, cell, bounds = plan[position]
        lo, hi = _count_range(remaining, cell, bounds)
        if position == 0 and first_value is not None:
            if not lo <= first_value <= hi:
                return
            lo = hi = first_value
        for value in range(lo, hi + 1):
            state['nodes'] += 1
            if state['nodes'] > budget:
                raise FiberTooLargeError(budget)
            for a in axes:
                remaining[a][cell[a]] -= value
            for s in scheme_range:
                keys[s] += weight_vectors[s][index] * value
            counts[index] = value
            descend(position + 1)
            for a in axes:
                remaining[a][cell[a]] += value
            for s in scheme_range:
                keys[s] -= weight_vectors[s][index] * value
        counts[index] = 0

    descend(0)
    return state['tables'], state['nodes']


def first_cell_range(margins, order=None):
    """Admissible counts of the first visited cell; the unit of parallel work."""
    margins = _as_margins(margins)
    cell_count = margins.levels ** margins.raters
    _, cell, bounds = _plan(margins.raters, margins.levels, _check_order(order, cell_count))[0]
    lo, hi = _count_range([list(m) for m in margins], cell, bounds)
    return range(lo, hi + 1)


def enumerate_fiber(margins, visitor=None, budget=None, order=None, check=False):
    """
    Visit every table of the fiber exactly once, in a deterministic order.

    Args:
        margins: MarginVector or nested sequence of one-way margins
        visitor: optional callable receiving each Table
        budget: maximum visited nodes, default ``config.FIBER_BUDGET``
        order: optional permutation of flat cell indices
        check: verify the margins of every visited table

    Returns:
        Number of tables in the fiber

    Raises:
        FiberTooLargeError: the walk exceeded the node budget
    """
    margins = _as_margins(margins)
    budget = config.FIBER_BUDGET if budget is None else budget
    raters, levels = margins.raters, margins.levels

    def visit(counts, keys):
        if visitor is None and not check:
            return
        table = Table(raters, levels, counts)
        if check and fiber_statistic(table) != margins:
            raise AssertionError(f'Enumerated table {counts} has the wrong margins')
        if visitor is not None:
            visitor(table)

    tables, nodes = _walk(margins, (), visit, budget, order)
    logger.info('Fiber of N=%s, r=%s, k=%s: %s tables, %s nodes', margins.total, raters, levels, tables, nodes)
    return tables


class _Extremes:
    """Tables whose key is within ``slack`` of the smallest key seen, in visit order."""

    def __init__(self, slack):
        self.slack = slack
        self.best = None
        self.entries = []

    def offer(self, key, counts):
        if self.best is None or key < self.best:
            self.best = key
            self.entries = [(k, c) for k, c in self.entries if k <= key + self.slack]
        if key <= self.best + self.slack:
            self.entries.append((key, counts))

    def merge(self, other):
        for key, counts in other.entries:
            self.offer(key, counts)

    def tables(self):
        return [counts for _, counts in self.entries]


class _SummaryCollector:
    def __init__(self, slack):
        self.size = 0
        self.histogram = Counter()
        self.best = _Extremes(slack)

    def __call__(self, counts, keys):
        key = keys[0]
        self.size += 1
        self.histogram[key] += 1
        self.best.offer(key, counts)

    def merge(self, other):
        self.size += other.size
        self.histogram.update(other.histogram)
        self.best.merge(other.best)


class _CrossCollector:
    """Range of the second key over tables whose first key matches ``target``."""

    def __init__(self, target, slack_a, slack_b):
        self.target = target
        self.slack_a = slack_a
        self.size = 0
        self.level = 0
        self.low = _Extremes(slack_b)
        self.high = _Extremes(slack_b)

    def __call__(self, counts, keys):
        self.size += 1
        if abs(keys[0] - self.target) <= self.slack_a:
            self.level += 1
            self.low.offer(keys[1], counts)
            self.high.offer(-keys[1], counts)

    def merge(self, other):
        self.size += other.size
        self.level += other.level
        self.low.merge(other.low)
        self.high.merge(other.high)


def _run_branch(task):
    margins, weight_vectors, collector, budget, order, first_value = task
    _, nodes = _walk(margins, weight_vectors, collector, budget, order, first_value)
    return collector, nodes


def _scan(margins, weight_vectors, make_collector, budget, workers, order=None):
    """Run one collector over the whole fiber, split on the first cell when ``workers > 1``."""
    budget = config.FIBER_BUDGET if budget is None else budget
    workers = config.THREADS if workers is None else workers
    values = first_cell_range(margins, order)

    if workers <= 1 or len(values) < 2:
        collector = make_collector()
        _, nodes = _walk(margins, weight_vectors, collector, budget, order)
        logger.debug('Scanned fiber: %s nodes', nodes)
        return collector

    tasks = [(margins, weight_vectors, make_collector(), budget, order, value) for value in values]
    with Pool(min(workers, len(tasks))) as pool:
        results = pool.map(_run_branch, tasks)

    collector = make_collector()
    total_nodes = 0
    for partial, nodes in results:
        collector.merge(partial)
        total_nodes += nodes
    if total_nodes > budget:
        raise FiberTooLargeError(budget)
    logger.debug('Scanned fiber with %s workers over %s branches: %s nodes', workers, len(tasks), total_nodes)
    return collector


def _slack(margins, exact):
    """Largest surrogate-key difference between tables that agree exactly."""
    if exact:
        return 0
    return margins.total * len(rater_pairs(margins.raters))


def _group_keys(histogram, slack):
    """Sorted (representative key, count) groups, merging keys closer than ``slack``."""
    groups = []
    for key in sorted(histogram):
        if groups and key - groups[-1][2] <= slack:
            representative, count, _ = groups[-1]
            groups[-1] = (representative, count + histogram[key], key)
        else:
            groups.append((key, histogram[key], key))
    return [(representative, count) for representative, count, _ in groups]


@dataclass
class FiberSummary:
    """Size, kappa histogram and maximum-kappa tables of one fiber under one scheme."""

    margins: MarginVector
    scheme: object
    size: int
    histogram: Counter
    max_kappa: object
    argmax_tables: list = field(default_factory=list)

    def kappa_histogram(self):
        """(KappaValue, count) pairs, highest kappa first."""
        slack = _slack(self.margins, self.scheme.exact)
        return [
            (kappa_from_disagreement(key, self.margins, self.scheme), count)
            for key, count in _group_keys(self.histogram, slack)
        ]

    def to_dict(self, include_histogram=True):
        data = {
            'scheme': self.scheme.kind,
            'margins': self.margins.to_list(),
            'size': self.size,
            'max_kappa': self.max_kappa.to_dict(),
            'argmax_count': len(self.argmax_tables),
            'argmax_tables': [t.nested() for t in self.argmax_tables],
        }
        if include_histogram:
            data['histogram'] = [
                {'kappa': kappa.value, 'display': kappa.display, 'count': count}
                for kappa, count in self.kappa_histogram()
            ]
        return data


def summarize_fiber(margins, scheme, budget=None, workers=None):
    """
    Enumerate a fiber once and collect its size, kappa histogram and maxima.

    Args:
        margins: MarginVector (or the table's ``fiber_statistic``)
        scheme: DisagreementScheme
        budget: node budget, default ``config.FIBER_BUDGET``
        workers: worker processes, default ``config.THREADS``

    Returns:
        FiberSummary
    """
    margins = _as_margins(margins)
    weights, _, exact = cell_weights(margins.raters, margins.levels, scheme)
    slack = _slack(margins, exact)
    collector = _scan(margins, (weights,), lambda: _SummaryCollector(slack), budget, workers)

    tables = [Table(margins.raters, margins.levels, c) for c in collector.best.tables()]
    max_kappa = weighted_kappa(tables[0], scheme)
    logger.info('Fiber size %s, max %s kappa %s attained by %s tables',
                collector.size, scheme.kind, max_kappa.display, len(tables))
    return FiberSummary(margins, scheme, collector.size, collector.histogram, max_kappa, tables)


@dataclass
class LevelSet:
    count: int
    kappa: object
    summary: FiberSummary

    def to_dict(self):
        data = {'level_set_count': self.count, 'kappa': self.kappa.to_dict()}
        data.update(self.summary.to_dict())
        return data


def level_set_count(table, scheme, budget=None, workers=None):
    """
    Count fiber tables with the same kappa as ``table``.

    Rational schemes compare exactly; the sqrt and float custom schemes
    compare their integer surrogates, which merges values within N x 1e-12.

    Returns:
        LevelSet with the count, the table's kappa and the full FiberSummary
    """
    margins = fiber_statistic(table)
    summary = summarize_fiber(margins, scheme, budget, workers)
    target = disagreement_numerator(table, scheme)
    slack = _slack(margins, scheme.exact)
    count = sum(c for key, c in summary.histogram.items() if abs(key - target) <= slack)
    return LevelSet(count, weighted_kappa(table, scheme), summary)


@dataclass
class CrossRange:
    level_set_count: int
    minimum: object
    maximum: object
    argmin_tables: list
    argmax_tables: list

    def to_dict(self):
        return {
            'level_set_count': self.level_set_count,
            'min': self.minimum.to_dict(),
            'max': self.maximum.to_dict(),
            'argmin_count': len(self.argmin_tables),
            'argmax_count': len(self.argmax_tables),
            'argmin_tables': [t.nested() for t in self.argmin_tables],
            'argmax_tables': [t.nested() for t in self.argmax_tables],
        }


def cross_scheme_range(table, scheme_a, scheme_b, budget=None, workers=None):
    """
    Range of ``scheme_b`` kappa over the ``scheme_a`` level set of ``table``.

    Returns:
        CrossRange with min/max KappaValues and every table attaining them
    """
    margins = fiber_statistic(table)
    weights_a, _, exact_a = cell_weights(table.raters, table.levels, scheme_a)
    weights_b, _, exact_b = cell_weights(table.raters, table.levels, scheme_b)
    target = disagreement_numerator(table, scheme_a)
    slack_a, slack_b = _slack(margins, exact_a), _slack(margins, exact_b)

    collector = _scan(
        margins, (weights_a, weights_b),
        lambda: _CrossCollector(target, slack_a, slack_b),
        budget, workers,
    )

    def tables(extremes):
        return [Table(table.raters, table.levels, c) for c in extremes.tables()]

    # smallest disagreement is the largest kappa
    argmax, argmin = tables(collector.low), tables(collector.high)
    return CrossRange(
        collector.level,
        weighted_kappa(argmin[0], scheme_b),
        weighted_kappa(argmax[0], scheme_b),
        argmin,
        argmax,
    )


def max_kappa_exhaustive(table, scheme, budget=None, workers=None):
    """
    Global maximum of kappa over the fiber of ``table``, by enumeration.

    Returns:
        (KappaValue, list of every table attaining it)
    """
    summary = summarize_fiber(fiber_statistic(table), scheme, budget, workers)
    return summary.max_kappa, summary.argmax_tables


def connectivity_check(margins, basis, budget=None):
    """
    True iff the basis connects the fiber.

    Nodes are the fiber tables and edges are signed basis moves that keep every
    cell nonnegative; the check is a breadth-first search from the first
    enumerated table.
    """
    margins = _as_margins(margins)
    if (basis.raters, basis.levels) != (margins.raters, margins.levels):
        raise DimensionError(
            f'Basis for {basis.raters} raters/{basis.levels} levels does not fit margins '
            f'for {margins.raters} raters/{margins.levels} levels'
        )
    nodes = []
    _walk(margins, (), lambda counts, keys: nodes.append(counts), config.FIBER_BUDGET if budget is None else budget)
    if not nodes:
        return True

    moves = [signed_move(basis, draw).flat_entries() for draw in range(2 * basis.size)]
    seen = {nodes[0]}
    queue = deque([nodes[0]])
    while queue:
        counts = queue.popleft()
        for entries in moves:
            if any(counts[index] + value < 0 for index, value in entries):
                continue
            neighbour = list(counts)
            for index, value in entries:
                neighbour[index] += value
            neighbour = tuple(neighbour)
            if neighbour not in seen:
                seen.add(neighbour)
                queue.append(neighbour)

    connected = len(seen) == len(nodes)
    logger.info('Connectivity over %s tables with %s moves: %s', len(nodes), basis.size, connected)
    return connected
