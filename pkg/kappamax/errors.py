"""Exception hierarchy shared by the library and the command-line interface.

Every error carries a ``kind`` string; the CLI reports it next to the message
so that callers can dispatch on it without parsing text.
"""


class KappamaxError(Exception):
    kind = 'error'

    def to_dict(self):
        return {'error': str(self), 'kind': self.kind}


class DimensionError(KappamaxError, ValueError):
    kind = 'dimension'


class NegativeCountError(KappamaxError, ValueError):
    kind = 'negative_count'


class SchemeError(KappamaxError, ValueError):
    kind = 'invalid_scheme'


class MoveRejectedError(KappamaxError):
    """Applying the move would make at least one cell negative."""
    kind = 'move_rejected'


class KappaUndefinedError(KappamaxError, ArithmeticError):
    """The table is empty or its expected agreement equals 1."""
    kind = 'kappa_undefined'


class FiberTooLargeError(KappamaxError):
    kind = 'fiber_too_large'

    def __init__(self, budget):
        super().__init__(budget)
        self.budget = budget

    def __str__(self):
        return f'Fiber enumeration exceeded the budget of {self.budget:,} visited nodes'


class TableFormatError(KappamaxError, ValueError):
    kind = 'table_format'


class EmptyBasisError(KappamaxError, ValueError):
    kind = 'empty_basis'


class ConfigError(KappamaxError, ValueError):
    """Annealing or simulation parameters out of range."""
    kind = 'invalid_config'


class OutputError(KappamaxError):
    """A result file could not be written."""
    kind = 'output'
