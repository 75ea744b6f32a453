"""Exception hierarchy shared by every subsystem.

Each class also carries the CLI exit code it maps to.
"""

from __future__ import annotations


class HqnnError(Exception):
    exit_code = 1


class ConfigurationError(HqnnError, ValueError):
    exit_code = 2


class DataError(HqnnError, ValueError):
    exit_code = 3


class NumericError(HqnnError, ArithmeticError):
    exit_code = 4


class ShapeError(ConfigurationError):
    pass


class DomainError(NumericError, ValueError):
    pass


class ContractError(HqnnError, RuntimeError):
    """A cache or checkpoint does not belong to the object it was handed to."""

    exit_code = 4


class ParseError(DataError):
    """SMILES syntax or valence problem at a byte offset."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


class LoadError(DataError):
    """Malformed input file; ``row`` is 1-based and counts the header."""

    def __init__(self, message: str, row: int | None = None, field: str | None = None):
        self.row = row
        self.field = field
        where = []
        if row is not None:
            where.append(f"row {row}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class SplitError(DataError):
    pass
