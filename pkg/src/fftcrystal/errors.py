# src/fftcrystal/errors.py
from __future__ import annotations


class FftCrystalError(RuntimeError):
    pass


class InvalidInputError(FftCrystalError, ValueError):
    pass


class DegenerateClusterError(InvalidInputError):
    """A zero standard deviation reached a formula that divides by it (apply σ_floor first)."""


class MembershipError(FftCrystalError):
    pass


class UndefinedMetricError(FftCrystalError):
    pass


class FormatError(FftCrystalError):
    """
    Base class for file format failures. Every subclass carries a stable `code`
    so callers (and the CLI) can tell failures apart without parsing messages.
    """
    code = "format"


class BadMagicError(FormatError):
    code = "bad-magic"


class VersionMismatchError(FormatError):
    code = "version-mismatch"


class TruncatedStreamError(FormatError):
    code = "truncated"


class CoverageError(FormatError, InvalidInputError):
    """A dictionary whose cells are not covered exactly once."""
    code = "coverage"


class UnsupportedFormatError(FormatError):
    code = "unsupported-format"
