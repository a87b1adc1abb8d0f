"""Exception types raised across the package."""


class DpdSplineError(Exception):
    """Base class for package errors."""


class InvalidDesignError(DpdSplineError, ValueError):
    pass


class InvalidOrderError(DpdSplineError, ValueError):
    pass


class DomainError(DpdSplineError, ValueError):
    """An argument lies outside the admissible domain of a function."""


class DegenerateDataError(DpdSplineError, ValueError):
    pass


class BadInitError(DpdSplineError, RuntimeError):
    pass


class SingularSystemError(DpdSplineError, RuntimeError):
    pass


class SelectionFailedError(DpdSplineError, RuntimeError):
    pass
