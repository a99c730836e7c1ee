"""Exception hierarchy.

Validation problems are returned as data (see ``ValidationReport``); the
exceptions here mark conditions the caller cannot continue past.
"""

from __future__ import annotations


class ProvenactError(Exception):
    """Base class for all package errors."""


class ActionRejected(ProvenactError):
    """Action failed validation or a precondition and was never dispatched."""

    def __init__(self, message: str, violations: tuple = ()) -> None:
        super().__init__(message)
        self.violations = tuple(violations)


class ResolutionError(ProvenactError):
    """A symbolic artifact reference could not be resolved."""


class DanglingParent(ProvenactError):
    pass


class DuplicateNodeId(ProvenactError):
    pass


class DuplicateAdapter(ProvenactError):
    pass


class NotFound(ProvenactError, KeyError):
    """Requested content hash is not in the artifact store."""

    def __str__(self) -> str:
        return Exception.__str__(self)


class MissingArtifact(ProvenactError):
    """A trace references a hash the store does not hold."""


class ParseError(ProvenactError):
    def __init__(self, message: str, line: int, offset: int = 0) -> None:
        super().__init__(f"line {line}, offset {offset}: {message}")
        self.line = line
        self.offset = offset


class PlannerError(ProvenactError):
    """Planner produced a malformed or inconsistent proposal."""


class UnknownNode(ProvenactError):
    pass


class EmptyModifications(ProvenactError):
    pass


class ModifiedPrefixNode(ProvenactError):
    pass


class InvariantViolation(ProvenactError):
    """An internal bookkeeping invariant does not hold; indicates an engine bug."""
