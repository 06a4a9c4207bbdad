"""Exception hierarchy shared by every module."""


class BinrepError(Exception):
    """Base class for all library errors."""


class ValidationError(BinrepError, ValueError):
    """Input data violates a structural invariant (counts, ids, status)."""


class ParseError(BinrepError, ValueError):
    """A file cell could not be parsed."""


class DomainError(BinrepError, ValueError):
    """A parameter lies outside its mathematical domain."""


class NumericalError(BinrepError, ArithmeticError):
    """A computation produced a non-finite or otherwise unusable value."""
