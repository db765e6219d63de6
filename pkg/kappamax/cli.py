"""Command-line interface: ``kappamax kappa|max|fiber|basis|simulate|history``.

Every command prints one JSON document on standard output. Library errors are
printed as ``{"error": ..., "kind": ...}`` with exit status 1, usage errors
with kind ``usage`` and status 2. Logging goes to standard error.
"""
import csv
import functools
import json
import logging
import sys

import click

from . import config
from .agreement import agreement_report
from .anneal import AnnealConfig, anneal_restarts
from .errors import DimensionError, KappamaxError, OutputError, TableFormatError
from .fiber import connectivity_check, cross_scheme_range, level_set_count, summarize_fiber
from .markov import markov_basis
from .simstudy import Scenario, load_scenarios, run_scenario, study_grid
from .store import default_store
from .table import fiber_statistic, new_table
from .weights import resolve_scheme

logger = logging.getLogger(__name__)

DEFAULT_KAPPA_SCHEMES = ('cohen', 'quadratic', 'linear', 'sqrt')
# Cohen's kappa is two-rater only; identity weights give the unweighted Conger kappa
MULTI_RATER_SCHEMES = ('identity', 'quadratic', 'linear', 'sqrt')


def _parse_csv(path, text):
    rows = [row for row in csv.reader(text.splitlines()) if any(cell.strip() for cell in row)]
    if not rows:
        raise TableFormatError(f'{path} holds no table')
    try:
        grid = [[int(cell.strip()) for cell in row] for row in rows]
    except ValueError as e:
        raise TableFormatError(f'{path} has a non-integer entry: {e}') from e
    k = len(grid)
    if any(len(row) != k for row in grid):
        raise DimensionError(f'{path} must hold a square k x k grid, got {k} rows of lengths {sorted({len(r) for r in grid})}')
    return new_table(2, k, [c for row in grid for c in row])


def _parse_json(path, text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise TableFormatError(f'{path} is not valid JSON: {e}') from e
    if not isinstance(data, dict):
        raise TableFormatError(f'{path} must hold a JSON object with raters, levels and counts')
    try:
        raters, levels, counts = data['raters'], data['levels'], data['counts']
    except KeyError as e:
        raise TableFormatError(f'{path} is missing the field {e}') from e
    if not isinstance(raters, int) or not isinstance(levels, int) or not isinstance(counts, list):
        raise TableFormatError(f'{path}: raters and levels must be integers and counts a flat list')
    if any(isinstance(c, list) for c in counts):
        raise TableFormatError(f'{path}: counts must be a flat list in rater-1-slowest order')
    return new_table(raters, levels, counts)


def parse_table(path):
    """
    Read a table file.

    Two formats are accepted: a CSV grid of a two-rater table (rows = rater 1),
    and a JSON object ``{"raters": r, "levels": k, "counts": [...]}`` with the
    counts flat in rater-1-slowest order and optional ``labels``.

    Raises:
        TableFormatError: unreadable or malformed file
        NegativeCountError, DimensionError: invalid counts
    """
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise TableFormatError(f'Cannot read table file {path}: {e}') from e
    if text.lstrip().startswith('{'):
        return _parse_json(path, text)
    return _parse_csv(path, text)


def table_to_json(table, labels=None):
    """The JSON table format, readable by :func:`parse_table`."""
    data = {'raters': table.raters, 'levels': table.levels, 'counts': list(table.counts)}
    if labels is not None:
        data['labels'] = list(labels)
    return data


def emit(data):
    click.echo(json.dumps(data, indent=2))


def reports_errors(command):
    """Turn library errors into a JSON error object and exit status 1."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except KappamaxError as e:
            logger.debug('Command failed', exc_info=True)
            emit(e.to_dict())
            click.get_current_context().exit(1)
    return wrapper


def _table_info(table):
    return {'raters': table.raters, 'levels': table.levels, 'total': table.total}


def write_output(path, write, newline=None):
    """Open ``path`` for writing and hand the file to ``write``."""
    try:
        with open(path, 'w', newline=newline) as f:
            write(f)
    except OSError as e:
        raise OutputError(f'Cannot write {path}: {e}') from e


class JsonErrorGroup(click.Group):
    """Command group that reports usage errors as JSON too."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            status = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.UsageError as e:
            emit({'error': e.format_message(), 'kind': 'usage'})
            sys.exit(e.exit_code)
        except click.ClickException as e:
            emit({'error': e.format_message(), 'kind': 'cli'})
            sys.exit(e.exit_code)
        except click.Abort:
            click.echo('Aborted!', err=True)
            sys.exit(1)
        if not standalone_mode:
            return status
        sys.exit(status if isinstance(status, int) else 0)


@click.group(cls=JsonErrorGroup)
@click.option('-v', '--verbose', count=True, help='Log progress to stderr (-vv for debug).')
def cli(verbose):
    """Weighted kappa, its maximum over fixed margins, and Markov-basis tools."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(stream=sys.stderr, level=level, force=True,
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')


@cli.command()
@click.argument('table_file', type=click.Path(dir_okay=False))
@click.option('--scheme', 'schemes', multiple=True,
              help='quadratic, linear, sqrt, identity, cohen or a CSV of disagreement weights; repeatable.')
@reports_errors
def kappa(table_file, schemes):
    """Observed/expected agreement and kappa of a table."""
    table = parse_table(table_file)
    if not schemes:
        schemes = DEFAULT_KAPPA_SCHEMES if table.raters == 2 else MULTI_RATER_SCHEMES
    kappas = {}
    for name in schemes:
        kappas[name] = agreement_report(table, resolve_scheme(name, table.levels))
    emit({'table': _table_info(table), 'kappas': kappas})


@cli.command(name='max')
@click.argument('table_file', type=click.Path(dir_okay=False))
@click.option('--scheme', default='quadratic', show_default=True)
@click.option('--tau0', type=float, default=1.0, show_default=True, help='Initial temperature.')
@click.option('--decay', type=float, default=0.999, show_default=True, help='Geometric cooling factor.')
@click.option('--stop-c', type=int, default=None, help='Stagnant steps before stopping [default: max(10 x basis size, 1000)].')
@click.option('--max-steps', type=int, default=None, help='Hard cap on steps.')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--restarts', type=int, default=1, show_default=True, help='Independent chains; the best is kept.')
@click.option('--output', type=click.Path(dir_okay=False), default=None, help='Also write the best table as JSON.')
@reports_errors
def max_kappa(table_file, scheme, tau0, decay, stop_c, max_steps, seed, restarts, output):
    """Search the fiber of a table for its maximum kappa by simulated annealing."""
    table = parse_table(table_file)
    anneal_config = AnnealConfig(tau0=tau0, decay=decay, stop_c=stop_c, max_steps=max_steps, seed=seed)
    best, results = anneal_restarts(table, resolve_scheme(scheme, table.levels), anneal_config, restarts)

    data = best.to_dict()
    data['scheme'] = scheme
    data['restarts'] = [{'seed': r.seed, 'kappa': r.best_kappa.value, 'steps_total': r.steps_total} for r in results]
    if output:
        write_output(output, lambda f: json.dump(table_to_json(best.best_table), f))
    emit(data)


@cli.command()
@click.argument('table_file', type=click.Path(dir_okay=False))
@click.option('--scheme', default='linear', show_default=True)
@click.option('--level-set', is_flag=True, help='Count tables sharing the input kappa.')
@click.option('--cross', nargs=2, default=None, metavar='A B',
              help='Range of scheme B kappa over the scheme A level set.')
@click.option('--connectivity', is_flag=True, help='Check that the Markov basis connects the fiber.')
@click.option('--histogram', type=click.Path(dir_okay=False), default=None, help='Write the kappa histogram as CSV.')
@click.option('--budget', type=int, envvar='KAPPAMAX_BUDGET', default=config.FIBER_BUDGET, show_default=True,
              help='Maximum enumeration nodes.')
@click.option('--threads', type=int, envvar='KAPPAMAX_THREADS', default=config.THREADS, show_default=True,
              help='Worker processes.')
@reports_errors
def fiber(table_file, scheme, level_set, cross, connectivity, histogram, budget, threads):
    """Enumerate the fiber of a table."""
    table = parse_table(table_file)
    data = {'table': _table_info(table)}

    if connectivity:
        basis = markov_basis(table.raters, table.levels)
        data['connected'] = connectivity_check(fiber_statistic(table), basis, budget)
        data['basis_size'] = basis.size
        emit(data)
        return

    if cross:
        scheme_a, scheme_b = (resolve_scheme(s, table.levels) for s in cross)
        data.update(cross_scheme_range(table, scheme_a, scheme_b, budget, threads).to_dict())
        data['schemes'] = list(cross)
        emit(data)
        return

    resolved = resolve_scheme(scheme, table.levels)
    if level_set:
        result = level_set_count(table, resolved, budget, threads)
        summary = result.summary
        data.update(result.to_dict())
    else:
        summary = summarize_fiber(fiber_statistic(table), resolved, budget, threads)
        data.update(summary.to_dict())

    if histogram:
        def write_histogram(f):
            writer = csv.writer(f)
            writer.writerow(['kappa', 'count'])
            for value, count in summary.kappa_histogram():
                writer.writerow([repr(value.value), count])
        write_output(histogram, write_histogram, newline='')
    emit(data)


@cli.command()
@click.option('--raters', '-r', type=int, default=2, show_default=True)
@click.option('--levels', '-k', type=int, required=True)
@click.option('--dump', is_flag=True, help='Include every move as {"plus": [...], "minus": [...]}.')
@reports_errors
def basis(raters, levels, dump):
    """Size (and optionally the moves) of the Markov basis of basic moves."""
    emit(markov_basis(raters, levels).to_dict(include_moves=dump))


@cli.command()
@click.option('--raters', '-r', type=int, default=2, show_default=True)
@click.option('--levels', '-k', type=int, default=3, show_default=True)
@click.option('--size', '-N', type=int, default=20, show_default=True)
@click.option('--scheme', default='quadratic', show_default=True)
@click.option('--non-homogeneous', is_flag=True, help='Use tilted marginal profiles.')
@click.option('--replicates', type=int, default=1000, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--tau0', type=float, default=1.0, show_default=True)
@click.option('--decay', type=float, default=0.999, show_default=True)
@click.option('--stop-c', type=int, default=None)
@click.option('--max-steps', type=int, default=None)
@click.option('--grid', is_flag=True, help='Run the full two- and three-rater grid.')
@click.option('--scenario', 'scenario_file', type=click.Path(dir_okay=False), default=None,
              help='JSON file with one scenario or a list of scenarios.')
@click.option('--threads', type=int, envvar='KAPPAMAX_THREADS', default=config.THREADS, show_default=True)
@click.option('--store', is_flag=True, help='Record runs in the DATABASE_URL result store.')
@reports_errors
def simulate(raters, levels, size, scheme, non_homogeneous, replicates, seed, tau0, decay, stop_c, max_steps,
             grid, scenario_file, threads, store):
    """Convergence-time study: one row (weight, k, N, mean, sd, q99) per scenario."""
    if scenario_file:
        scenarios = load_scenarios(scenario_file)
    elif grid:
        scenarios = study_grid(replicates, seed)
    else:
        anneal_config = AnnealConfig(tau0=tau0, decay=decay, stop_c=stop_c, max_steps=max_steps)
        scenarios = [Scenario(raters, levels, size, scheme, not non_homogeneous, replicates, seed, anneal=anneal_config)]

    result_store = default_store() if store else None
    rows = []
    for scenario in scenarios:
        stats = run_scenario(scenario, threads)
        row = stats.to_dict(scenario)
        if result_store is not None:
            row['run_id'] = result_store.save_run(scenario, stats)
        rows.append(row)
    emit(rows)


@cli.command()
@click.option('--limit', type=int, default=20, show_default=True)
@click.option('--times', 'run_id', type=int, default=None, help='Print the replicate times of one run.')
@click.option('--delete', 'delete_id', type=int, default=None, help='Remove one run and its replicate times.')
@reports_errors
def history(limit, run_id, delete_id):
    """Stored simulation runs, newest first."""
    result_store = default_store()
    if delete_id is not None:
        emit({'run_id': delete_id, 'deleted': result_store.delete_run(delete_id)})
        return
    if run_id is not None:
        emit({'run_id': run_id, 'steps_total': result_store.replicate_times(run_id)})
        return
    emit(result_store.list_runs(limit))


def main():
    cli()

