"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from __future__ import annotations


class TrwError(Exception):
    exit_code = 1


class ParseError(TrwError):
    exit_code = 2

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class VerificationError(TrwError):
    exit_code = 3


class SizeLimitError(TrwError):
    exit_code = 4


class BoundDecreaseError(TrwError):
    """Raised when a solver pass lowers the bound; always an implementation bug."""

    exit_code = 3
