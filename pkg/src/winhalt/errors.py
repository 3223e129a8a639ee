"""Exception hierarchy.  ``exit_code`` is what the CLI returns for each."""
from __future__ import annotations


class WinHaltError(Exception):
    exit_code = 1

    def to_json(self) -> dict:
        return {"error": type(self).__name__, "message": str(self), "exit_code": self.exit_code}


class InvalidDistribution(WinHaltError, ValueError):
    pass


class InvalidResponse(InvalidDistribution):
    pass


class BudgetExceeded(WinHaltError):
    pass


class PreconditionError(WinHaltError):
    exit_code = 3


class InsufficientMass(PreconditionError):
    pass


class DegenerateGame(PreconditionError):
    pass


class Bipartite(PreconditionError):
    pass


class NotFound(WinHaltError):
    exit_code = 4


class NoWinnerFound(NotFound):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ShapeMismatch(WinHaltError, ValueError):
    pass


class UndefinedAction(WinHaltError):
    pass


class ActionOutOfRange(WinHaltError, ValueError):
    pass


class DecodeError(WinHaltError, ValueError):
    pass


class TruncatedCode(DecodeError):
    pass


class UnknownOpcode(DecodeError):
    pass


class TrailingBits(DecodeError):
    pass


class EmptyMass(WinHaltError):
    pass


class ConfigInvalid(WinHaltError):
    exit_code = 2
