"""Exception types raised by evacsim."""

from __future__ import annotations


class EvacSimError(Exception):
    """Base class for all evacsim errors."""


class NegativeDeadline(EvacSimError):
    pass


class InvalidSpeed(EvacSimError):
    pass


class ParseError(EvacSimError):
    pass


class ValidationError(EvacSimError):
    def __init__(self, violations: list[str] | str):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InfeasibleLayout(EvacSimError):
    pass


class ExitBlocked(EvacSimError):
    pass


class MissingSnapshot(EvacSimError):
    pass


class NonMonotonicTime(EvacSimError):
    pass


class CapacityExceeded(EvacSimError):
    pass


class ConfigError(EvacSimError):
    pass


class AuditFailure(EvacSimError):
    pass


class InsufficientSamples(EvacSimError):
    pass


class MissingBaseline(EvacSimError):
    pass
