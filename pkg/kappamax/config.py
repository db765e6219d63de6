"""Environment-driven settings.

Read once at import time. Tests set ``TESTING=1`` before importing the package
so that nothing ever touches an on-disk result store.
"""
import logging
import os

logger = logging.getLogger(__name__)

is_testing = os.environ.get('TESTING') == '1'

DEFAULT_BUDGET = 10 ** 8


def _int_from_env(name, default):
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw.replace('_', ''))
    except ValueError:
        logger.warning('Ignoring non-integer %s=%r, using %s', name, raw, default)
        return default


FIBER_BUDGET = _int_from_env('KAPPAMAX_BUDGET', DEFAULT_BUDGET)
THREADS = max(1, _int_from_env('KAPPAMAX_THREADS', 1))


def database_url():
    """
    Resolve the result-store URL.

    In testing mode this is always an in-memory SQLite database. For file-backed
    SQLite URLs the parent directory is created if needed.

    Returns:
        SQLAlchemy database URL string
    """
    if is_testing:
        return 'sqlite:///:memory:'

    db_url = os.environ.get('DATABASE_URL', 'sqlite:///kappamax.db')
    if not db_url.startswith('sqlite:///') or ':memory:' in db_url:
        return db_url

    # sqlite:////abs/path -> /abs/path, sqlite:///rel/path -> rel/path
    db_path = db_url[len('sqlite:///'):]
    db_dir = os.path.dirname(db_path)
    if db_dir and db_dir != '/':
        try:
            os.makedirs(db_dir, exist_ok=True)
        except OSError as e:
            logger.warning('Could not create database directory %s: %s', db_dir, e)
    return db_url
