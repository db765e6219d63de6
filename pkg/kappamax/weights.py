"""Disagreement weighting schemes.

A scheme stores the disagreement weights ``u = 1 - w``: zero on the diagonal,
in ``(0, 1]`` elsewhere, symmetric. Quadratic, linear and identity weights also
keep an exact integer form ``numerators / denominator`` so that kappa values
can be compared without rounding.
"""
import csv
import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import SchemeError, TableFormatError

BUILTIN_KINDS = ('quadratic', 'linear', 'sqrt', 'identity')

# Irrational weights are compared through integers at this resolution.
SURROGATE_SCALE = 10 ** 12
FLOAT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class RationalForm:
    numerators: tuple
    denominator: int

    def fraction(self, i, j):
        return Fraction(self.numerators[i][j], self.denominator)


@dataclass(frozen=True)
class DisagreementScheme:
    levels: int
    u: tuple
    kind: str
    rational_form: RationalForm = None

    @property
    def exact(self):
        return self.rational_form is not None

    def matrix(self):
        """Disagreement weights as a float array."""
        return np.array(self.u, dtype=float)

    def agreement_matrix(self):
        """Agreement weights ``w = 1 - u``."""
        return 1.0 - self.matrix()

    def weight(self, i, j):
        return self.u[i][j]

    def integer_form(self):
        """
        Integer weights proportional to ``u``.

        Exact schemes return their rational form. Irrational schemes return
        ``round(u * SURROGATE_SCALE)``, which orders and groups tables correctly
        as long as their weighted sums differ by more than N / SURROGATE_SCALE.

        Returns:
            (numerators as tuple of tuples, denominator, exact flag)
        """
        if self.rational_form is not None:
            return self.rational_form.numerators, self.rational_form.denominator, True
        numerators = tuple(tuple(round(x * SURROGATE_SCALE) for x in row) for row in self.u)
        return numerators, SURROGATE_SCALE, False

    def to_dict(self):
        return {
            'kind': self.kind,
            'levels': self.levels,
            'u': [list(row) for row in self.u],
        }


def _check_levels(k):
    if not isinstance(k, int) or k < 2:
        raise SchemeError(f'A weighting scheme needs at least 2 levels, got {k!r}')


def _from_rational(kind, k, numerator):
    denominator_value = max(numerator(i, j) for i in range(k) for j in range(k))
    numerators = tuple(tuple(numerator(i, j) for j in range(k)) for i in range(k))
    u = tuple(tuple(n / denominator_value for n in row) for row in numerators)
    return DisagreementScheme(k, u, kind, RationalForm(numerators, denominator_value))


def quadratic_scheme(k):
    """u_ij = (i - j)^2 / (k - 1)^2."""
    _check_levels(k)
    return _from_rational('quadratic', k, lambda i, j: (i - j) ** 2)


def linear_scheme(k):
    """u_ij = |i - j| / (k - 1)."""
    _check_levels(k)
    return _from_rational('linear', k, lambda i, j: abs(i - j))


def identity_scheme(k):
    """Unit disagreement off the diagonal; reduces weighted kappa to Cohen's kappa."""
    _check_levels(k)
    return _from_rational('identity', k, lambda i, j: int(i != j))


def sqrt_scheme(k):
    """u_ij = sqrt(|i - j|) / sqrt(k - 1); no exact form."""
    _check_levels(k)
    scale = math.sqrt(k - 1)
    u = tuple(tuple(math.sqrt(abs(i - j)) / scale for j in range(k)) for i in range(k))
    return DisagreementScheme(k, u, 'sqrt')


def custom_scheme(matrix):
    """
    Validate a user-supplied disagreement matrix.

    Entries given as ints or Fractions keep an exact rational form; any float
    entry makes the whole scheme inexact.

    Args:
        matrix: square nested sequence of disagreement weights u_ij

    Returns:
        DisagreementScheme with kind 'custom'

    Raises:
        SchemeError: non-square, asymmetric, nonzero diagonal, or off-diagonal
            entries outside (0, 1]
    """
    rows = [list(row) for row in matrix]
    k = len(rows)
    if k < 2 or any(len(row) != k for row in rows):
        raise SchemeError('A custom scheme must be a square matrix with at least 2 levels')

    exact = all(isinstance(x, (int, Fraction)) and not isinstance(x, bool) for row in rows for x in row)
    if exact:
        values = [[Fraction(x) for x in row] for row in rows]
    else:
        try:
            values = [[float(x) for x in row] for row in rows]
        except (TypeError, ValueError):
            raise SchemeError('Custom scheme entries must be numbers') from None
        if not all(math.isfinite(x) for row in values for x in row):
            raise SchemeError('Custom scheme entries must be finite')

    def close(a, b):
        return a == b if exact else abs(a - b) <= FLOAT_TOLERANCE

    for i in range(k):
        if values[i][i] != 0:
            raise SchemeError(f'Diagonal entry u[{i}][{i}] must be 0, got {values[i][i]}')
        for j in range(k):
            if i == j:
                continue
            if not close(values[i][j], values[j][i]):
                raise SchemeError(f'Scheme is not symmetric at ({i}, {j})')
            if not 0 < values[i][j] <= 1:
                raise SchemeError(f'Off-diagonal entry u[{i}][{j}] = {values[i][j]} is outside (0, 1]')

    if exact:
        denominator = math.lcm(*(x.denominator for row in values for x in row))
        numerators = tuple(tuple(int(x * denominator) for x in row) for row in values)
        u = tuple(tuple(float(x) for x in row) for row in values)
        return DisagreementScheme(k, u, 'custom', RationalForm(numerators, denominator))
    return DisagreementScheme(k, tuple(tuple(row) for row in values), 'custom')


def is_distance(scheme):
    """True iff u_ij <= u_ih + u_hj for every triple (i, h, j)."""
    k = scheme.levels
    if scheme.rational_form is not None:
        u = scheme.rational_form.numerators
        slack = 0
    else:
        u = scheme.u
        slack = FLOAT_TOLERANCE
    for i in range(k):
        for j in range(k):
            for h in range(k):
                if u[i][j] > u[i][h] + u[h][j] + slack:
                    return False
    return True


SCHEME_BUILDERS = {
    'quadratic': quadratic_scheme,
    'linear': linear_scheme,
    'sqrt': sqrt_scheme,
    'identity': identity_scheme,
    # Cohen's kappa is the identity scheme under another name
    'cohen': identity_scheme,
}


def load_scheme_csv(path):
    """Read a k x k CSV of disagreement weights; decimals and 'a/b' fractions are read exactly."""
    try:
        with open(path, newline='') as f:
            rows = [row for row in csv.reader(f) if any(cell.strip() for cell in row)]
    except OSError as e:
        raise TableFormatError(f'Cannot read scheme file {path}: {e}') from e
    try:
        matrix = [[Fraction(cell.strip()) for cell in row] for row in rows]
    except (ValueError, ZeroDivisionError) as e:
        raise TableFormatError(f'Scheme file {path} has a non-numeric entry: {e}') from e
    return custom_scheme(matrix)


def resolve_scheme(source, levels):
    """
    Turn a scheme name or CSV path into a scheme for ``levels`` categories.

    Args:
        source: one of quadratic/linear/sqrt/identity/cohen, or a path to a CSV
        levels: number of categories of the table it will be used with
    """
    name = source.strip().lower()
    if name in SCHEME_BUILDERS:
        return SCHEME_BUILDERS[name](levels)
    if os.path.exists(source):
        scheme = load_scheme_csv(source)
        if scheme.levels != levels:
            raise SchemeError(f'Scheme {source} has {scheme.levels} levels, the table has {levels}')
        return scheme
    raise SchemeError(f'Unknown scheme {source!r}; expected one of {", ".join(BUILTIN_KINDS)} or a CSV path')
