"""Exception types shared across the package (mapped to CLI exit codes)."""

from __future__ import annotations

__all__ = ["ConfigError", "NumericError", "AcceptanceError"]


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (exit code 2)."""


class NumericError(ArithmeticError):
    """A numerical invariant was violated during a run (exit code 3)."""


class AcceptanceError(RuntimeError):
    """A comparison fell outside its acceptance threshold (exit code 4)."""
