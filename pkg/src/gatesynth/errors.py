"""Exception hierarchy shared by every module."""

from __future__ import annotations

from typing import Any


class GateSynthError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(GateSynthError, ValueError):
    """An argument violates an operation's preconditions."""


class NotFoundError(GateSynthError, KeyError):
    """A named entity (instruction set, gate alias) is not registered."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class ParseError(GateSynthError):
    """Malformed input file or string; the message carries field context."""


class CapacityExceededError(GateSynthError):
    """A size or layer budget was exhausted.

    ``best`` holds the best result found before giving up, when there is one.
    """

    def __init__(self, message: str, best: Any = None):
        super().__init__(message)
        self.best = best


class ConnectivityError(GateSynthError):
    """A two-qubit operation acts on a pair that is not a device edge."""


class MissingCalibrationError(GateSynthError):
    """No usable fidelity data for a gate kind on an edge."""
