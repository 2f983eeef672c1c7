"""Exception types shared across the package."""


class AmerputError(Exception):
    """Base class for all package errors."""


class InputError(AmerputError):
    """Malformed user input: bad quotes, bad files, bad trees."""


class InconsistencyError(AmerputError):
    """Quotes or curves fail a structural requirement (e.g. no implied unit mass)."""


class InternalError(AmerputError):
    """An internal invariant broke; usually indicates tolerance breakdown."""


class NotApplicableError(AmerputError):
    """A strategy constructor was called without its triggering violation."""
