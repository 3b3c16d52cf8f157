"""Exception types shared across the toolkit."""

from __future__ import annotations


class HpnError(Exception):
    """Base class for all toolkit errors."""


class StructuralError(HpnError):
    """The net or hierarchy violates a structural invariant."""


class MissingAtomError(HpnError):
    """A guard references an atom absent from the supplied valuation."""

    def __init__(self, atom: str):
        super().__init__(f"valuation does not assign atom {atom!r}")
        self.atom = atom


class NotEnabledError(HpnError):
    """Attempt to fire a transition that is not enabled."""


class MarkingEquationError(HpnError):
    """Applying a firing count vector would drive a place negative."""


class GuardSyntaxError(HpnError):
    """Malformed guard expression text."""

    def __init__(self, message: str, column: int | None = None):
        self.column = column
        if column is not None:
            message = f"{message} (column {column + 1})"
        super().__init__(message)


class InvariantEnumerationAborted(HpnError):
    """Invariant enumeration exceeded the configured intermediate-row cap."""


class ValuationExplosionError(HpnError):
    """Valued-mode branching exceeded the valuation cap."""
