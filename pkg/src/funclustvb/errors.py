"""Exception hierarchy. CLI exit codes key off the base classes."""


class FunclustError(Exception):
    """Base class for all package errors."""


class DataError(FunclustError, ValueError):
    """Input data is malformed or inconsistent."""


class ShapeError(DataError):
    pass


class InvalidBasisError(DataError):
    pass


class InvalidDomainError(DataError):
    pass


class OutOfDomainError(DataError):
    pass


class InfeasibleError(DataError):
    """More clusters requested than there are curves."""


class ParseError(DataError):
    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


class NumericFailure(FunclustError, ArithmeticError):
    """A fit produced a non-finite value."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message if iteration is None else f"{message} at iteration {iteration}")
        self.iteration = iteration


class NotConvergedError(FunclustError):
    """An operation that needs a converged fit was handed one that is not."""


class DomainError(FunclustError, ValueError):
    """Argument outside the domain of a special function."""
