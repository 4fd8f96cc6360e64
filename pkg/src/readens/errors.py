"""Exception hierarchy shared by every module and the CLI."""

from __future__ import annotations


class ReadensError(Exception):
    """Base class; the CLI maps it to exit code 1."""


class ValidationError(ReadensError, ValueError):
    pass


class ParseError(ValidationError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class DomainError(ReadensError, ValueError):
    """Value outside the bounds of its scale."""


class ConfigurationError(ReadensError, ValueError):
    pass


class EmptyInputError(ReadensError, ValueError):
    pass


class InsufficientDataError(ReadensError, ValueError):
    pass


class TrainingDivergedError(ReadensError, RuntimeError):
    pass
