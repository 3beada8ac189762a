"""Exception hierarchy shared across the package.

Every raised error carries a stable machine-readable ``code`` (e.g.
``BAD_MAGIC``, ``ZERO_NORM``) so that callers and the CLI can dispatch on it
without parsing human-readable messages.
"""

from __future__ import annotations


class PedScreenError(Exception):
    """Base class for all package errors."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


class FormatError(PedScreenError):
    """Malformed file content: EMB1 containers, metadata tables, CSV input."""


class DataError(PedScreenError):
    """Dataset-level contract violation (shapes, roles, missing columns)."""


class ComputeError(PedScreenError):
    """Invalid numeric input to a computation (zero norms, bad params...)."""


class SmilesError(PedScreenError):
    """SMILES parse failure; ``position`` is the 0-based offset in the input."""

    def __init__(self, code: str, message: str, position: int):
        super().__init__(code, f"{message} (at position {position})")
        self.position = position


class UsageError(PedScreenError):
    """Bad CLI flag combination or value; maps to exit code 2."""
