"""Monte Carlo study of annealing convergence times.

A scenario draws tables from a multinomial whose cell probabilities are the
product of one marginal profile per rater, runs the annealer on each, and
summarizes the stopping times. Every replicate has its own random stream,
derived from the base seed and the replicate index, so results do not depend
on the number of worker processes or on the order replicates finish in.
"""
import functools
import json
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from multiprocessing import Pool

import numpy as np

from . import config as settings
from .anneal import AnnealConfig, anneal_max_kappa
from .errors import ConfigError, KappaUndefinedError, TableFormatError
from .markov import markov_basis
from .table import Table, zero_table
from .weights import resolve_scheme

logger = logging.getLogger(__name__)

PROFILE_TOLERANCE = 1e-12
# Degenerate draws are resampled at most this many times per replicate
MAX_ATTEMPTS = 1000


def default_profiles(levels, homogeneous=True, raters=2):
    """
    Marginal profiles for ``raters`` raters over ``levels`` categories.

    Homogeneous profiles are uniform. Non-homogeneous ones model raters that
    lean towards low or high categories: for k = 3 these are (2/5, 2/5, 1/5)
    and (1/5, 2/5, 2/5); otherwise the low profile is proportional to
    (k - i + 1) + k and the high one to i + k, for i = 1..k. Each further
    rater t = 3, 4, ... leans low more mildly, proportional to
    (k - i + 1) + (t - 1) k, so every rater has its own profile.

    Returns:
        tuple of ``raters`` probability tuples
    """
    if not isinstance(levels, int) or levels < 2:
        raise ConfigError(f'Profiles need at least 2 levels, got {levels!r}')
    if raters < 2:
        raise ConfigError(f'Profiles need at least 2 raters, got {raters}')

    uniform = tuple(Fraction(1, levels) for _ in range(levels))
    if homogeneous:
        exact = [uniform] * raters
    else:
        if levels == 3:
            low = (Fraction(2, 5), Fraction(2, 5), Fraction(1, 5))
            high = (Fraction(1, 5), Fraction(2, 5), Fraction(2, 5))
        else:
            low_raw = [(levels - i + 1) + levels for i in range(1, levels + 1)]
            high_raw = [i + levels for i in range(1, levels + 1)]
            low = tuple(Fraction(x, sum(low_raw)) for x in low_raw)
            high = tuple(Fraction(x, sum(high_raw)) for x in high_raw)
        mild = []
        for t in range(3, raters + 1):
            raw = [(levels - i + 1) + (t - 1) * levels for i in range(1, levels + 1)]
            mild.append(tuple(Fraction(x, sum(raw)) for x in raw))
        exact = [low, high] + mild
    return tuple(tuple(float(p) for p in profile) for profile in exact)


def _check_profiles(profiles, raters, levels):
    if len(profiles) != raters:
        raise ConfigError(f'Expected {raters} marginal profiles, got {len(profiles)}')
    for profile in profiles:
        if len(profile) != levels:
            raise ConfigError(f'Profile {profile} does not have {levels} entries')
        if any(p < 0 for p in profile):
            raise ConfigError(f'Profile {profile} has a negative probability')
        if abs(sum(profile) - 1) > PROFILE_TOLERANCE:
            raise ConfigError(f'Profile {profile} sums to {sum(profile)}, not 1')


@dataclass(frozen=True)
class Scenario:
    raters: int
    levels: int
    size: int
    scheme: str = 'quadratic'
    homogeneous: bool = True
    replicates: int = 1000
    seed: int = 0
    profiles: tuple = None
    anneal: AnnealConfig = field(default_factory=AnnealConfig)

    def __post_init__(self):
        if self.size < 0:
            raise ConfigError(f'Sample size must be nonnegative, got {self.size}')
        if self.replicates < 1:
            raise ConfigError(f'A scenario needs at least one replicate, got {self.replicates}')
        if self.profiles is None:
            profiles = default_profiles(self.levels, self.homogeneous, self.raters)
        else:
            profiles = tuple(tuple(float(p) for p in profile) for profile in self.profiles)
        _check_profiles(profiles, self.raters, self.levels)
        object.__setattr__(self, 'profiles', profiles)

    @classmethod
    def from_dict(cls, data):
        """Build from a JSON object; annealing overrides go under ``anneal``."""
        try:
            anneal = AnnealConfig(**data.get('anneal', {}))
            fields = {k: v for k, v in data.items() if k != 'anneal'}
            if 'k' in fields:
                fields['levels'] = fields.pop('k')
            if 'N' in fields:
                fields['size'] = fields.pop('N')
            return cls(anneal=anneal, **fields)
        except TypeError as e:
            raise TableFormatError(f'Invalid scenario {data!r}: {e}') from e

    def label(self):
        margins = 'homogeneous' if self.homogeneous else 'non-homogeneous'
        return f'r={self.raters} k={self.levels} N={self.size} {self.scheme} {margins}'

    def cell_probabilities(self):
        """Product of the rater profiles, flat in rater-1-slowest order."""
        joint = functools.reduce(np.multiply.outer, [np.asarray(p) for p in self.profiles])
        flat = joint.ravel()
        return flat / flat.sum()

    def to_dict(self):
        return {
            'raters': self.raters,
            'levels': self.levels,
            'size': self.size,
            'scheme': self.scheme,
            'homogeneous': self.homogeneous,
            'replicates': self.replicates,
            'seed': self.seed,
            'profiles': [list(p) for p in self.profiles],
            'anneal': self.anneal.to_dict(),
        }


def load_scenarios(path):
    """Read one scenario object or a list of them from a JSON file."""
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise TableFormatError(f'Cannot read scenario file {path}: {e}') from e
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list) or not all(isinstance(d, dict) for d in data):
        raise TableFormatError(f'Scenario file {path} must hold an object or a list of objects')
    return [Scenario.from_dict(d) for d in data]


@dataclass(frozen=True)
class ScenarioStats:
    mean: float
    sd: float
    q99: int
    times: tuple
    resampled: int

    @classmethod
    def from_times(cls, times, resampled=0):
        values = np.asarray(times, dtype=float)
        n = len(values)
        sd = float(np.std(values, ddof=1)) if n > 1 else 0.0
        # nearest-rank percentile, always one of the observed values
        q99 = sorted(times)[math.ceil(0.99 * n) - 1]
        return cls(float(values.mean()), sd, int(q99), tuple(times), resampled)

    def row(self, scenario):
        """Summary row: weight, k, N, mean, sd, q99."""
        return {
            'weight': scenario.scheme,
            'k': scenario.levels,
            'N': scenario.size,
            'mean': self.mean,
            'sd': self.sd,
            'q99': self.q99,
        }

    def to_dict(self, scenario):
        data = self.row(scenario)
        data.update({
            'raters': scenario.raters,
            'homogeneous': scenario.homogeneous,
            'replicates': len(self.times),
            'resampled': self.resampled,
            'seed': scenario.seed,
        })
        return data


def _streams(scenario, replicate, attempt):
    """(sampling generator, annealing seed) for one draw of one replicate."""
    sequence = np.random.SeedSequence(entropy=scenario.seed, spawn_key=(replicate, attempt))
    sampling, annealing = sequence.spawn(2)
    return np.random.default_rng(sampling), int(annealing.generate_state(1)[0])


def sample_table(scenario, replicate, attempt=0):
    """
    One multinomial table of size N for a replicate.

    Deterministic in (scenario seed, replicate, attempt).
    """
    if scenario.size == 0:
        return zero_table(scenario.raters, scenario.levels)
    rng, _ = _streams(scenario, replicate, attempt)
    counts = rng.multinomial(scenario.size, scenario.cell_probabilities())
    return Table(scenario.raters, scenario.levels, tuple(int(c) for c in counts))


def _run_replicate(args):
    scenario, replicate = args
    scheme = resolve_scheme(scenario.scheme, scenario.levels)
    basis = markov_basis(scenario.raters, scenario.levels)
    for attempt in range(MAX_ATTEMPTS):
        table = sample_table(scenario, replicate, attempt)
        _, anneal_seed = _streams(scenario, replicate, attempt)
        try:
            result = anneal_max_kappa(table, scheme, replace(scenario.anneal, seed=anneal_seed), basis)
        except KappaUndefinedError:
            logger.debug('Replicate %s attempt %s drew a degenerate table, resampling', replicate, attempt)
            continue
        return result.steps_total, attempt
    raise ConfigError(f'{scenario.label()}: no usable table after {MAX_ATTEMPTS} draws')


def run_scenario(scenario, workers=None):
    """
    Anneal every replicate of ``scenario`` and summarize the stopping times.

    Args:
        scenario: Scenario
        workers: worker processes, default ``KAPPAMAX_THREADS``

    Returns:
        ScenarioStats; identical for identical scenarios whatever ``workers`` is
    """
    workers = settings.THREADS if workers is None else workers
    tasks = [(scenario, replicate) for replicate in range(scenario.replicates)]
    if workers <= 1:
        outcomes = [_run_replicate(task) for task in tasks]
    else:
        with Pool(min(workers, len(tasks))) as pool:
            outcomes = pool.map(_run_replicate, tasks)

    times = [steps for steps, _ in outcomes]
    resampled = sum(attempts for _, attempts in outcomes)
    stats = ScenarioStats.from_times(times, resampled)
    logger.info('%s: mean %.1f, sd %.1f, q99 %s (%s resampled)',
                scenario.label(), stats.mean, stats.sd, stats.q99, resampled)
    return stats


def study_grid(replicates=1000, seed=0):
    """
    The full study: two raters with k in (3, 5, 7), three raters with k in
    (3, 5); N in (20, 100); homogeneous and non-homogeneous margins; the
    quadratic, linear and sqrt schemes.
    """
    scenarios = []
    for raters, level_options in ((2, (3, 5, 7)), (3, (3, 5))):
        for homogeneous in (True, False):
            for scheme in ('quadratic', 'linear', 'sqrt'):
                for levels in level_options:
                    for size in (20, 100):
                        scenarios.append(Scenario(
                            raters, levels, size, scheme, homogeneous, replicates, seed,
                        ))
    return scenarios
