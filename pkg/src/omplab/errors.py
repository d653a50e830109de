"""Exceptions raised by omplab.

Every class also derives from the builtin exception a caller would expect
(``ValueError`` for bad input, ``OSError`` for I/O) so plain ``except`` clauses
keep working.
"""


class OmplabError(Exception):
    """Base class for all omplab errors."""


class DimensionError(OmplabError, ValueError):
    """Operand shapes do not agree."""


class IllConditionedError(OmplabError, ValueError):
    """A column set is numerically rank deficient.

    Parameters
    ----------
    message: str
    support: tuple of int
        The offending column indices, in selection order.
    """

    def __init__(self, message, support=()):
        super().__init__(message)
        self.support = tuple(support)


class CapExceededError(OmplabError, ValueError):
    """An exhaustive enumeration would examine more subsets than allowed."""

    def __init__(self, message, count, cap):
        super().__init__(message)
        self.count = count
        self.cap = cap


class FormatError(OmplabError, ValueError):
    """A file does not follow the documented omplab format."""


class ResultIOError(OmplabError, OSError):
    """Reading or writing a result file failed."""

    def __init__(self, message, path):
        super().__init__(message)
        self.path = path
