"""Exporter exception taxonomy.

Two top-level families mirror the engine CLI's exit-code contract:
:class:`ValidationError` maps to exit code 1 (bad parameters, unusable
backend), :class:`FormatError` maps to exit code 2 (unreadable media,
malformed caption files, nothing exportable).
"""

from __future__ import annotations


class ExporterError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ExporterError):
    """Invalid parameters or configuration (CLI exit code 1)."""


class InvalidParams(ValidationError):
    """A value is out of range, malformed, or inconsistent."""


class BackendUnavailable(ValidationError):
    """The requested feature backend cannot be constructed in this environment."""


class FormatError(ExporterError):
    """Unreadable or malformed input data (CLI exit code 2)."""


class CaptionsError(FormatError):
    """The captions file is missing, malformed, or has the wrong shape."""


class DecodeError(FormatError):
    """A single clip or caption could not be decoded.

    Raised per item; the export loop converts it into a skip entry rather
    than aborting the whole run.
    """


class EmptyExport(FormatError):
    """Every item was skipped — an export that produces no records is an error."""


__all__ = [
    "ExporterError",
    "ValidationError",
    "InvalidParams",
    "BackendUnavailable",
    "FormatError",
    "CaptionsError",
    "DecodeError",
    "EmptyExport",
]
