import json
import os

import pytest

# Set TESTING before importing kappamax so the result store is in memory
os.environ['TESTING'] = '1'

from click.testing import CliRunner

from kappamax.store import default_store
from kappamax.table import new_table, table_from_array


RATINGS_4X4 = [[5, 3, 2, 1], [1, 4, 3, 0], [0, 1, 5, 1], [0, 1, 2, 4]]
# quadratic kappa extremes over the linear level set of RATINGS_4X4
LEVEL_SET_MIN = [[6, 0, 1, 4], [0, 8, 0, 0], [0, 0, 7, 0], [0, 1, 4, 2]]
LEVEL_SET_MAX = [[6, 5, 0, 0], [0, 3, 5, 0], [0, 1, 2, 4], [0, 0, 5, 2]]

# three of the tables attaining the maximum linear kappa in that fiber
LINEAR_MAX_A = [[6, 5, 0, 0], [0, 4, 4, 0], [0, 0, 7, 0], [0, 0, 1, 6]]
LINEAR_MAX_B = [[6, 3, 2, 0], [0, 6, 2, 0], [0, 0, 7, 0], [0, 0, 1, 6]]
LINEAR_MAX_C = [[6, 1, 4, 0], [0, 8, 0, 0], [0, 0, 7, 0], [0, 0, 1, 6]]

# three raters, three levels, flat with rater 1 slowest
THREE_RATER_COUNTS = [
    2, 1, 0, 0, 1, 0, 0, 0, 1,
    0, 1, 0, 1, 3, 1, 0, 0, 0,
    0, 1, 0, 0, 1, 0, 0, 0, 3,
]

# the worked move example: n, the move m and n + m
MOVE_EXAMPLE_N = [[4, 0, 0, 0], [0, 4, 1, 0], [0, 0, 4, 1], [0, 0, 0, 4]]
MOVE_EXAMPLE_N_PRIME = [[4, 0, 0, 0], [0, 4, 0, 1], [0, 0, 5, 0], [0, 0, 0, 4]]


@pytest.fixture
def ratings_4x4():
    return table_from_array(RATINGS_4X4)


@pytest.fixture
def three_rater_table():
    return new_table(3, 3, THREE_RATER_COUNTS)


@pytest.fixture
def runner():
    """Click test runner with stdout kept apart from log output."""
    return CliRunner(mix_stderr=False)


@pytest.fixture(autouse=True)
def fresh_store():
    """Give every test its own in-memory result store."""
    default_store.cache_clear()
    yield
    default_store.cache_clear()


@pytest.fixture
def write_table(tmp_path):
    """Write a table file and return its path; lists of rows become CSV, dicts JSON."""
    def write(content, name=None):
        if isinstance(content, dict):
            path = tmp_path / (name or 'table.json')
            path.write_text(json.dumps(content))
        else:
            path = tmp_path / (name or 'table.csv')
            path.write_text('\n'.join(','.join(str(c) for c in row) for row in content) + '\n')
        return str(path)
    return write
