"""Exception hierarchy for the doseopt package.

Validation problems (bad parameters, doses outside the design space,
malformed designs) derive from :class:`ValidationError`, which is a
``ValueError`` so that plain value checks behave as callers expect.
Numerical failures (singular information matrices, optimizer
non-convergence) derive from :class:`ComputationError`.
"""

from __future__ import annotations


class DoseOptError(Exception):
    """Base class for all doseopt errors."""


class ValidationError(DoseOptError, ValueError):
    """Invalid user input: parameters, doses, designs or documents."""


class InvalidParameterError(ValidationError):
    """A parameter vector violates the constraints of its model."""


class DomainError(ValidationError):
    """A dose or configuration lies outside the admissible domain."""


class NoNestingError(ValidationError):
    """The requested model pair is not linked by a single-parameter
    restriction."""


class UnreachableConfigurationError(ValidationError):
    """No composition of the power and rate scaling maps connects the two
    design configurations."""


class ComputationError(DoseOptError):
    """Base class for numerical failures."""


class SingularInformationError(ComputationError):
    """The information matrix is singular for the requested quantity.

    Attributes
    ----------
    rank : int or None
        Numerical rank of the offending matrix when known.
    size : int or None
        Dimension of the matrix.
    """

    def __init__(self, message: str, rank: int | None = None, size: int | None = None):
        super().__init__(message)
        self.rank = rank
        self.size = size


class SingularSystemError(ComputationError):
    """The design-matrix F built from the candidate support points is
    singular, so the explicit weight formula is undefined."""


class NegativeWeightError(ComputationError):
    """The explicit weight formula produced a non-positive component,
    signalling that the points are not the optimal support."""


class NonFiniteObjectiveError(ComputationError):
    """The objective is NaN at the starting point."""


class OptimizerFailureError(ComputationError):
    """The solver exhausted its retry budget without producing a design
    that passes its optimality certificate."""
