import numpy as np
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union


# Do direct naming so modules can use base.List etc.
Callable = Callable
Dict = Dict
Iterator = Iterator
List = List
Optional = Optional
Sequence = Sequence
Tuple = Tuple
Union = Union

# Data types
ArrayType = np.ndarray
VectorType = Union[Sequence[float], np.ndarray]
ScalarOrArray = Union[float, np.ndarray]

# Library defaults
DEFAULT_STEP = 1e-4
DEFAULT_GRID = 2 ** 14
DEFAULT_GUARD = 1e8
VARIATION_TOL = 1e-10
VARIATION_MAX_LEVEL = 22
MOLLIFIER_CELLS = 2 ** 12
L1_POINTS = 10 ** 4
DEFAULT_SEED = 42
COMMUTING_TOL = 1e-9
MATCH_TOL = 1e-9


class BVSimError(Exception):
    """Base class for all errors raised on purpose by bvsim."""

    pass


class DomainError(BVSimError, ValueError):
    """An argument lies outside the domain of an operation."""

    pass


class ComputationError(BVSimError):
    """A numerical procedure failed to converge."""

    pass


class ExprSyntaxError(BVSimError):
    """Malformed expression source."""

    def __init__(self, message: str, position: int = None):
        """
        Initialise the syntax error.

        :message (str): What went wrong.
        :position (int, default = None): Character offset in the source.
        """
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super(ExprSyntaxError, self).__init__(message)


class UnknownIdentifierError(ExprSyntaxError):
    """Identifier that is neither a variable nor a known function."""

    pass


class ArityError(ExprSyntaxError):
    """Function called with the wrong number of arguments."""

    pass


class EvaluationError(BVSimError, ArithmeticError):
    """Expression evaluation hit a division by zero, a domain error or a non-finite value."""

    pass


class UnsupportedDerivativeError(BVSimError):
    """Symbolic differentiation reached a non-differentiable node."""

    pass


class ConfigurationError(BVSimError):
    """Inconsistent configuration (dimensions, overrides, ...)."""

    pass


class PreconditionError(BVSimError):
    """An operation was called on data violating its precondition."""

    pass


class UsageError(BVSimError):
    """Objects combined in an unsupported way."""

    pass


class BlowUpError(BVSimError):
    """State norm exceeded the growth guard."""

    pass


class NumericError(BVSimError):
    """Non-finite state encountered during integration."""

    pass


class ScenarioError(BVSimError):
    """Scenario file diagnostic, always carrying the line and the field."""

    def __init__(self, message: str, line: int = None, field: str = None):
        """
        Initialise the scenario diagnostic.

        :message (str): What went wrong.
        :line (int, default = None): Line number in the scenario file (1-based).
        :field (str, default = None): Section and key, e.g. 'dynamics.g1'.
        """
        self.line = line
        self.field = field
        super(ScenarioError, self).__init__(f"line {line}, field '{field}': {message}")
