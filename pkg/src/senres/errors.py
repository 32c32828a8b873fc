# src/senres/errors.py
from __future__ import annotations

from typing import Optional

# Exit codes shared by every CLI command.
EXIT_OK = 0
EXIT_USER = 2
EXIT_NUMERIC = 3


class SenresError(Exception):
    """Root of every error the toolkit raises on purpose."""
    exit_code: int = EXIT_USER


class ShapeError(SenresError, ValueError):
    pass


class TapeError(SenresError, RuntimeError):
    pass


class InputTooShortError(SenresError, ValueError):
    pass


class InvalidParamsError(SenresError, ValueError):
    pass


class InvalidChannelsError(SenresError, ValueError):
    pass


class InvalidStateError(SenresError, RuntimeError):
    pass


class SchemaError(SenresError, ValueError):
    pass


class FormatError(SenresError, ValueError):
    pass


class ConfigError(SenresError, ValueError):
    pass


class InsufficientDataError(SenresError, ValueError):
    pass


class ParseError(SenresError, ValueError):
    """Ingestion failure pinned to a file location (`path:line: message`)."""

    def __init__(self, message: str, *, path: str = "", line: Optional[int] = None, column: Optional[str] = None) -> None:
        self.message = message
        self.path = path
        self.line = line
        self.column = column
        super().__init__(self._render())

    def _render(self) -> str:
        loc = self.path
        if self.line is not None:
            loc = f"{loc}:{self.line}"
        if self.column:
            loc = f"{loc} [{self.column}]"
        return f"{loc}: {self.message}" if loc else self.message


class NumericError(SenresError, ArithmeticError):
    exit_code = EXIT_NUMERIC

    def __init__(self, message: str, *, epoch: Optional[int] = None) -> None:
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}" if epoch is not None else message)


__all__ = [
    "EXIT_OK", "EXIT_USER", "EXIT_NUMERIC",
    "SenresError", "ShapeError", "TapeError", "InputTooShortError", "InvalidParamsError",
    "InvalidChannelsError", "InvalidStateError", "SchemaError", "FormatError", "ConfigError",
    "InsufficientDataError", "ParseError", "NumericError",
]
