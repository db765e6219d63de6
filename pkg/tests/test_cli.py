"""Tests for the kappamax command-line interface."""
import csv
import json

import pytest

from kappamax.cli import cli, parse_table, table_to_json
from kappamax.errors import DimensionError, NegativeCountError, TableFormatError
from tests.conftest import RATINGS_4X4, THREE_RATER_COUNTS

IDENTITY = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
SWAP_OUTER = [[0, 0, 1], [0, 1, 0], [1, 0, 0]]


def run_json(runner, args, code=0):
    result = runner.invoke(cli, args)
    assert result.exit_code == code, result.stdout + result.stderr
    return json.loads(result.stdout)


def test_parse_csv_table(write_table):
    """Test that a CSV grid becomes a two-rater table."""
    table = parse_table(write_table(RATINGS_4X4))
    assert table.raters == 2
    assert table.nested() == RATINGS_4X4


def test_parse_csv_ignores_blank_lines_and_spaces(tmp_path):
    """Test that padding around entries and empty lines are tolerated."""
    path = tmp_path / 'table.csv'
    path.write_text('\n 1, 2\n3 ,4\n\n')
    assert parse_table(str(path)).nested() == [[1, 2], [3, 4]]


def test_parse_json_table(write_table):
    """Test the flat JSON format for several raters."""
    table = parse_table(write_table({'raters': 3, 'levels': 3, 'counts': THREE_RATER_COUNTS, 'labels': ['a', 'b', 'c']}))
    assert table.raters == 3
    assert table.total == 16


def test_table_to_json_round_trip(write_table, three_rater_table):
    """Test that emitted tables can be read back."""
    data = table_to_json(three_rater_table, labels=['low', 'mid', 'high'])
    assert data['labels'] == ['low', 'mid', 'high']
    assert parse_table(write_table(data)) == three_rater_table


@pytest.mark.parametrize('content, error', [
    ([[1, 2, 3], [4, 5]], DimensionError),
    ([[1, -2], [3, 4]], NegativeCountError),
    ([[1, 'x'], [3, 4]], TableFormatError),
    ({'raters': 2, 'levels': 2}, TableFormatError),
    ({'raters': 2, 'levels': 2, 'counts': [[1, 2], [3, 4]]}, TableFormatError),
    ({'raters': 2, 'levels': 2, 'counts': [1, 2, 3]}, DimensionError),
])
def test_parse_table_errors(write_table, content, error):
    """Test that malformed table files raise the matching error."""
    with pytest.raises(error):
        parse_table(write_table(content))


def test_parse_missing_file(tmp_path):
    """Test that a missing file is a format error."""
    with pytest.raises(TableFormatError):
        parse_table(str(tmp_path / 'nope.csv'))


def test_kappa_command_defaults(runner, write_table):
    """Test the kappa command with its default schemes."""
    data = run_json(runner, ['kappa', write_table(RATINGS_4X4)])
    assert data['table'] == {'raters': 2, 'levels': 4, 'total': 33}
    assert set(data['kappas']) == {'cohen', 'quadratic', 'linear', 'sqrt'}
    assert data['kappas']['cohen']['exact'] == '2/5'
    assert data['kappas']['linear']['display'] == '0.5023'
    assert data['kappas']['quadratic']['exact'] == '31/53'
    assert data['kappas']['sqrt']['exact'] is None


def test_kappa_command_selected_scheme(runner, write_table, tmp_path):
    """Test --scheme with a built-in name and with a weights file."""
    weights = tmp_path / 'weights.csv'
    weights.write_text('0,1,1\n1,0,1\n1,1,0\n')
    data = run_json(runner, ['kappa', write_table(IDENTITY), '--scheme', 'linear', '--scheme', str(weights)])
    assert list(data['kappas']) == ['linear', str(weights)]
    assert data['kappas'][str(weights)]['scheme'] == 'custom'
    assert data['kappas']['linear']['value'] == 1.0


def test_kappa_command_three_raters(runner, write_table):
    """Test that three-rater tables default to identity weights instead of Cohen's kappa."""
    path = write_table({'raters': 3, 'levels': 3, 'counts': THREE_RATER_COUNTS})
    data = run_json(runner, ['kappa', path])
    assert list(data['kappas']) == ['identity', 'quadratic', 'linear', 'sqrt']
    assert data['kappas']['linear']['display'] == '0.4872'


def test_kappa_command_degenerate_table(runner, write_table):
    """Test that undefined kappa is reported as an error with exit status 1."""
    data = run_json(runner, ['kappa', write_table([[0, 0], [0, 5]]), '--scheme', 'linear'], code=1)
    assert data['kind'] == 'kappa_undefined'


def test_missing_table_file(runner, tmp_path):
    """Test the JSON error for an unreadable table file."""
    data = run_json(runner, ['kappa', str(tmp_path / 'missing.csv')], code=1)
    assert data['kind'] == 'table_format'
    assert 'missing.csv' in data['error']


def test_unknown_scheme(runner, write_table):
    """Test the JSON error for an unknown scheme name."""
    data = run_json(runner, ['kappa', write_table(RATINGS_4X4), '--scheme', 'cubic'], code=1)
    assert data['kind'] == 'invalid_scheme'


def test_max_command(runner, write_table, tmp_path):
    """Test the annealing command and its --output table."""
    output = tmp_path / 'best.json'
    data = run_json(runner, [
        'max', write_table(RATINGS_4X4), '--scheme', 'linear', '--stop-c', '200', '--seed', '2',
        '--restarts', '2', '--output', str(output),
    ])
    assert data['scheme'] == 'linear'
    assert data['stopped_by'] == 'stagnation'
    assert data['best_kappa']['value'] >= data['initial_kappa']['value']
    assert len(data['restarts']) == 2
    best = parse_table(str(output))
    assert best.nested() == data['best_table']
    assert best.total == 33


def test_max_command_is_reproducible(runner, write_table):
    """Test that the same seed prints the same result."""
    path = write_table(RATINGS_4X4)
    args = ['max', path, '--stop-c', '100', '--seed', '5']
    assert run_json(runner, args) == run_json(runner, args)


def test_max_command_bad_config(runner, write_table):
    """Test that invalid annealing parameters are reported as JSON errors."""
    data = run_json(runner, ['max', write_table(RATINGS_4X4), '--decay', '1.5'], code=1)
    assert data['kind'] == 'invalid_config'


def test_fiber_command(runner, write_table, tmp_path):
    """Test the fiber summary and its CSV histogram."""
    histogram = tmp_path / 'histogram.csv'
    data = run_json(runner, ['fiber', write_table(SWAP_OUTER), '--histogram', str(histogram)])
    assert data['size'] == 6
    assert data['max_kappa']['exact'] == '1/1'
    assert data['argmax_tables'] == [IDENTITY]
    with open(histogram) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['kappa', 'count']
    assert [int(count) for _, count in rows[1:]] == [1, 2, 3]


def test_fiber_level_set(runner, write_table):
    """Test --level-set under the default linear scheme."""
    data = run_json(runner, ['fiber', write_table(SWAP_OUTER), '--level-set'])
    assert data['level_set_count'] == 3
    assert data['size'] == 6


def test_fiber_cross_range(runner, write_table):
    """Test --cross with two schemes."""
    data = run_json(runner, ['fiber', write_table(SWAP_OUTER), '--cross', 'linear', 'quadratic'])
    assert data['schemes'] == ['linear', 'quadratic']
    assert data['level_set_count'] == 3
    assert data['min']['exact'] == '-1/1'
    assert data['max']['exact'] == '-1/2'


def test_fiber_connectivity(runner, write_table):
    """Test --connectivity on a small fiber."""
    data = run_json(runner, ['fiber', write_table([[2, 1], [0, 2]]), '--connectivity'])
    assert data == {'table': {'raters': 2, 'levels': 2, 'total': 5}, 'connected': True, 'basis_size': 1}


def test_fiber_budget(runner, write_table):
    """Test that the node budget is enforced from the command line."""
    data = run_json(runner, ['fiber', write_table(RATINGS_4X4), '--budget', '50'], code=1)
    assert data['kind'] == 'fiber_too_large'


def test_fiber_budget_from_environment(runner, write_table):
    """Test that KAPPAMAX_BUDGET sets the default budget."""
    result = runner.invoke(cli, ['fiber', write_table(RATINGS_4X4)], env={'KAPPAMAX_BUDGET': '50'})
    assert result.exit_code == 1
    assert json.loads(result.stdout)['kind'] == 'fiber_too_large'


def test_basis_command(runner):
    """Test the basis size for two and three raters."""
    assert run_json(runner, ['basis', '-k', '4']) == {'raters': 2, 'levels': 4, 'size': 36}
    data = run_json(runner, ['basis', '-r', '3', '-k', '2', '--dump'])
    assert data['size'] == 12
    assert len(data['moves']) == 12
    assert all(len(m['plus']) == 2 and len(m['minus']) == 2 for m in data['moves'])


def test_basis_command_bad_levels(runner):
    """Test the JSON error for a basis with one level."""
    data = run_json(runner, ['basis', '-k', '1'], code=1)
    assert data['kind'] == 'dimension'


def test_simulate_command(runner):
    """Test one small scenario from the command line."""
    rows = run_json(runner, ['simulate', '-k', '3', '-N', '20', '--replicates', '3', '--stop-c', '40', '--seed', '1'])
    assert len(rows) == 1
    row = rows[0]
    assert (row['weight'], row['k'], row['N']) == ('quadratic', 3, 20)
    assert row['replicates'] == 3
    assert row['q99'] >= 40
    assert 'run_id' not in row


def test_simulate_scenario_file(runner, tmp_path):
    """Test --scenario with a list of scenarios."""
    path = tmp_path / 'scenarios.json'
    path.write_text(json.dumps([
        {'raters': 2, 'k': 3, 'N': 10, 'replicates': 2, 'anneal': {'stop_c': 30}},
        {'raters': 3, 'k': 2, 'N': 10, 'scheme': 'linear', 'homogeneous': False, 'replicates': 2,
         'anneal': {'stop_c': 30}},
    ]))
    rows = run_json(runner, ['simulate', '--scenario', str(path)])
    assert [(r['raters'], r['weight'], r['homogeneous']) for r in rows] == [(2, 'quadratic', True), (3, 'linear', False)]


def test_simulate_store_and_history(runner):
    """Test that stored runs show up in the history with their replicate times."""
    rows = run_json(runner, ['simulate', '--replicates', '2', '--stop-c', '30', '--store'])
    run_id = rows[0]['run_id']

    runs = run_json(runner, ['history'])
    assert [r['id'] for r in runs] == [run_id]
    assert runs[0]['replicates'] == 2

    times = run_json(runner, ['history', '--times', str(run_id)])
    assert times['run_id'] == run_id
    assert len(times['steps_total']) == 2
    assert all(t >= 30 for t in times['steps_total'])


def test_history_empty(runner):
    """Test that a fresh store has no runs."""
    assert run_json(runner, ['history']) == []


def test_verbose_logs_to_stderr(runner, write_table):
    """Test that -v sends progress logs to stderr and leaves stdout as JSON."""
    result = runner.invoke(cli, ['-v', 'max', write_table(RATINGS_4X4), '--stop-c', '50'])
    assert result.exit_code == 0
    assert json.loads(result.stdout)['stop_c'] == 50
    assert 'Annealing (seed 0)' in result.stderr


def test_unknown_command_is_a_json_error(runner):
    """Test that an unknown subcommand is reported as a JSON usage error with status 2."""
    data = run_json(runner, ['frobnicate'], code=2)
    assert data['kind'] == 'usage'
    assert 'frobnicate' in data['error']


def test_missing_option_is_a_json_error(runner):
    """Test that a missing required option is reported as a JSON usage error."""
    data = run_json(runner, ['basis'], code=2)
    assert data['kind'] == 'usage'
    assert '--levels' in data['error']


def test_help_still_prints_text(runner):
    """Test that --help exits cleanly with the usage text."""
    result = runner.invoke(cli, ['--help'])
    assert result.exit_code == 0
    assert 'Usage' in result.stdout


def test_unwritable_output_file(runner, write_table, tmp_path):
    """Test that a --output path that cannot be written is a JSON error."""
    output = tmp_path / 'missing-dir' / 'best.json'
    data = run_json(runner, ['max', write_table(RATINGS_4X4), '--stop-c', '50', '--output', str(output)], code=1)
    assert data['kind'] == 'output'
    assert 'best.json' in data['error']


def test_unwritable_histogram_file(runner, write_table, tmp_path):
    """Test that a --histogram path that cannot be written is a JSON error."""
    histogram = tmp_path / 'missing-dir' / 'histogram.csv'
    data = run_json(runner, ['fiber', write_table(SWAP_OUTER), '--histogram', str(histogram)], code=1)
    assert data['kind'] == 'output'


def test_history_delete(runner):
    """Test that --delete removes a stored run once."""
    run_id = run_json(runner, ['simulate', '--replicates', '2', '--stop-c', '30', '--store'])[0]['run_id']
    assert run_json(runner, ['history', '--delete', str(run_id)]) == {'run_id': run_id, 'deleted': True}
    assert run_json(runner, ['history', '--delete', str(run_id)]) == {'run_id': run_id, 'deleted': False}
    assert run_json(runner, ['history']) == []
