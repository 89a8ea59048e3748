"""Exception hierarchy shared by the storage tiers, indexes, and pipeline."""

from __future__ import annotations


class ContextDbError(Exception):
    """Base class for every error raised by this package."""


class InvalidVectorError(ContextDbError):
    """Vector construction rejected (empty, non-1D, or non-finite values)."""


class DimensionMismatchError(ContextDbError):
    """Two vectors (or a vector and an index) disagree on dimensionality."""

    def __init__(self, expected: int, got: int, what: str = "vector"):
        super().__init__(f"{what} has dim {got}, expected dim {expected}")
        self.expected = expected
        self.got = got


class UnknownFixtureKeyError(ContextDbError):
    """Text has no entry in the built-in demo embedding table."""

    def __init__(self, text: str, known: tuple[str, ...]):
        super().__init__(
            f"no fixture embedding for {text!r}; known keys: " + ", ".join(repr(k) for k in known)
        )
        self.text = text
        self.known = known


class FilterTypeMismatchError(ContextDbError):
    """A filter clause compared incompatible metadata value kinds."""

    def __init__(self, field: str, stored_kind: str, literal_kind: str):
        super().__init__(
            f"filter on field {field!r} compares stored {stored_kind} against {literal_kind}"
        )
        self.field = field
        self.stored_kind = stored_kind
        self.literal_kind = literal_kind


class FilterParseError(ContextDbError):
    """Filter string does not conform to the clause grammar."""

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (column {column})")
        self.column = column


class EmptyIndexError(ContextDbError):
    """Search attempted against an index holding no documents."""


class NotTrainedError(ContextDbError):
    """IVF operation that requires trained centroids was called before train()."""


class TrainingDataError(ContextDbError):
    """Too few vectors supplied to train an IVF coarse quantizer."""

    def __init__(self, required: int, got: int):
        super().__init__(f"training requires at least {required} vectors, got {got}")
        self.required = required
        self.got = got


class SnapshotVersionError(ContextDbError):
    """Snapshot file was written with an unsupported format version."""

    def __init__(self, found: int, supported: int):
        super().__init__(f"snapshot format version {found} not supported (expected {supported})")
        self.found = found
        self.supported = supported


class SnapshotCorruptError(ContextDbError):
    """Snapshot file is truncated, has a bad checksum, or malformed payload."""


class StorageError(ContextDbError):
    """A durable store could not be read or written consistently."""


class ProfileNotFoundError(ContextDbError):
    """Targeted profile update addressed a user that does not exist."""

    def __init__(self, user_id: str):
        super().__init__(f"no profile for user {user_id!r}")
        self.user_id = user_id


class TemplateError(ContextDbError):
    """Prompt template is missing or repeats a required placeholder."""


class StageError(ContextDbError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"pipeline stage {stage!r} failed: {cause}")
        self.stage = stage


class CatalogError(ContextDbError):
    """Catalog ingestion could not produce a usable index."""
