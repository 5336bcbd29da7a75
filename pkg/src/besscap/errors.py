"""Errors raised across the package, each mapped to a distinct CLI exit code."""

from __future__ import annotations


class BesscapError(Exception):
    """Base class for all package errors.

    Attributes:
        exit_code: process exit code the CLI uses for this error class.
    """

    exit_code = 1
    kind = "error"


class ConfigError(BesscapError):
    """Invalid or inconsistent run configuration."""

    exit_code = 2
    kind = "config"


class SchemaError(BesscapError):
    """CSV schema mismatch: missing columns or unparsable fields."""

    exit_code = 3
    kind = "schema"


class TimeOrderError(BesscapError):
    """Timestamps not strictly increasing or not on a uniform grid."""

    exit_code = 4
    kind = "time_order"


class GapError(BesscapError):
    """Missing samples exceed the configured interpolation limit."""

    exit_code = 5
    kind = "gap"


class EmptyInputError(BesscapError):
    """Input file or series contains no data rows."""

    exit_code = 6
    kind = "empty"


class InputError(BesscapError):
    """Invalid argument values or mismatched series."""

    exit_code = 7
    kind = "input"


class StateError(InputError):
    """Battery state outside its feasible range."""

    kind = "state"


class PreconditionError(BesscapError):
    """A documented operation precondition does not hold (e.g. EA condition)."""

    exit_code = 8
    kind = "precondition"


class EngineError(BesscapError):
    """A compute engine failed (solver could not certify optimality, bad cell)."""

    exit_code = 9
    kind = "engine"


class ToleranceError(BesscapError):
    """A requested cross-check exceeded its certification tolerance."""

    exit_code = 10
    kind = "tolerance"


_KIND_TO_CLASS = {
    cls.kind: cls
    for cls in (
        BesscapError,
        ConfigError,
        SchemaError,
        TimeOrderError,
        GapError,
        EmptyInputError,
        InputError,
        StateError,
        PreconditionError,
        EngineError,
        ToleranceError,
    )
}


def error_from_kind(kind: str, message: str) -> BesscapError:
    """Rebuild a typed error from its wire `kind` tag (service -> CLI path)."""
    return _KIND_TO_CLASS.get(kind, BesscapError)(message)
