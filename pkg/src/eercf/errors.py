"""Exception hierarchy for the retrieval engine.

All failures raised by this package derive from :class:`EercfError`, split
into two broad families so callers (and the CLI) can map them to outcomes:

* :class:`ValidationError` — the inputs or configuration are wrong.
* :class:`FormatError` — a data file is unreadable or corrupt.
"""

from __future__ import annotations


class EercfError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(EercfError):
    """Invalid input data or configuration."""


class FormatError(EercfError):
    """A binary container or manifest file is malformed."""


class ZeroNorm(ValidationError):
    """A vector that must be normalized has (near-)zero length."""


class EmptyInput(ValidationError):
    """An operation received an empty feature set."""


class ShapeMismatch(ValidationError):
    """Array shapes or dimensions disagree with the declared layout."""


class EmptyGallery(ValidationError):
    """A search was issued against a gallery with no videos."""


class UnknownId(ValidationError):
    """A referenced video or text id does not exist."""


class MissingGroundTruth(ValidationError):
    """A query has no ground-truth pairing, so it cannot be scored."""


class BatchTooSmall(ValidationError):
    """A loss needs in-batch negatives; the batch has fewer than two rows."""


class DegenerateChannel(ValidationError):
    """A feature channel is constant across the batch; correlation is undefined."""


class InvalidConfig(ValidationError):
    """A configuration object violates its invariants."""


class InvalidParams(ValidationError):
    """Operation parameters are out of range or inconsistent."""


class BadMagic(FormatError):
    """A file does not start with the expected magic bytes."""


class VersionUnsupported(FormatError):
    """The container version is not supported by this reader."""


class Truncated(FormatError):
    """A file ended in the middle of a record (or carries trailing bytes)."""
