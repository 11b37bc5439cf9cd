from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    line: int
    column: int
    message: str

    def to_dict(self) -> dict:
        return asdict(self)

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


class HdlError(Exception):
    """Base class for MiniRTL front-end failures; carries a Diagnostic."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.diagnostic = Diagnostic("error", line, column, message)
        super().__init__(str(self.diagnostic))


class HdlSyntaxError(HdlError):
    pass


class UnresolvedIdentifierError(HdlError):
    pass


class WidthError(HdlError):
    pass


class MultipleDriversError(HdlError):
    pass


class DriverKindError(HdlError):
    """Assignment to a net of the wrong kind (wire from a process, input, ...)."""
