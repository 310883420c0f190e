"""Exception hierarchy shared by every ORE module."""

from __future__ import annotations


class OreError(Exception):
    """Base class for all errors raised by the package."""

    code = "E_ORE"


class ValidationError(OreError, ValueError):
    """An input violates a documented invariant."""

    code = "E_VALIDATION"


class ParseError(ValidationError):
    """A file line could not be parsed."""

    code = "E_PARSE"

    def __init__(self, message: str, line: int | None = None, path: str | None = None) -> None:
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class UnknownIdError(OreError, KeyError):
    """A document, query or pair identifier is not known to the structure queried."""

    code = "E_LOOKUP"

    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else ""


class BudgetError(OreError):
    """A ranker call would exceed the per-query budget."""

    code = "E_BUDGET"


class RefusalError(OreError):
    """An operation refused to run without an explicit override."""

    code = "E_REFUSED"
