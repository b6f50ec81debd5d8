"""
Exception hierarchy for the gearbox diagnostics toolkit.

Validation failures subclass ValueError so callers can keep catching the
builtin; every class carries the CLI exit code it maps to.
"""

from typing import Optional


class GearDiagError(Exception):
    """Root of all toolkit errors."""

    exit_code: int = 3
    kind: str = "data"


class UsageError(GearDiagError):
    """Unknown subcommand, flag or argument combination."""

    exit_code = 1
    kind = "usage"


class ConfigError(GearDiagError, ValueError):
    """Run configuration or profile violates its schema."""

    exit_code = 2
    kind = "config"

    def __init__(self, message: str, fields: Optional[list[str]] = None):
        super().__init__(message)
        self.fields = fields or []


class DataFormatError(GearDiagError, ValueError):
    """Input file or payload cannot be parsed."""

    def __init__(self, message: str, path: Optional[str] = None, offset: Optional[int] = None):
        super().__init__(message)
        self.path = path
        self.offset = offset


class ChecksumError(DataFormatError):
    """Payload length or digest does not match its manifest."""


class VersionMismatchError(DataFormatError):
    """Manifest format or version is not the one this build reads."""


class ShapeError(GearDiagError, ValueError):
    """Array dimensions disagree with what an operation expects."""


class OneClassViolationError(GearDiagError, ValueError):
    """Damaged-labeled data handed to healthy-only training."""


class FingerprintMismatchError(GearDiagError, ValueError):
    """Segment was produced with a different preprocessing configuration."""


class NumericError(GearDiagError, ArithmeticError):
    """Non-finite values during training or optimization."""

    exit_code = 4
    kind = "numeric"


class ClassPresenceError(GearDiagError, ValueError):
    """A label column lacks either its healthy or its damaged class."""
