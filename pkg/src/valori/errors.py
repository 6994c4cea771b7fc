"""Typed error hierarchy shared by every layer of the kernel."""


class ValoriError(Exception):
    """Base class for all kernel errors."""


class NonFiniteInput(ValoriError):
    """A NaN or infinite float reached the fixed-point boundary."""


class DimensionMismatch(ValoriError):
    """Vector dimensions disagree with each other or with the configured dim."""


class Unimplemented(ValoriError):
    """A declared-but-unimplemented precision contract was requested."""


class DuplicateId(ValoriError):
    """Insert of an id that is live or tombstoned (ids are never reused)."""


class UnknownId(ValoriError):
    """Delete/Link referenced an id that is missing or tombstoned."""


class SelfLink(ValoriError):
    """Link(a, a) is rejected."""


class DuplicateNode(ValoriError):
    """Graph insert of a node that already exists."""


class UnknownNode(ValoriError):
    """Graph removal of a node that does not exist."""


class BadMagic(ValoriError):
    """Snapshot or log file does not start with the expected magic bytes."""


class UnsupportedVersion(ValoriError):
    """Snapshot or log format version is not understood."""


class UnsupportedPrecision(ValoriError):
    """Snapshot or log declares a precision contract this build cannot execute."""


class CorruptSection(ValoriError):
    """A snapshot section failed structural decoding."""

    def __init__(self, name: str, offset: int, detail: str = ""):
        self.name = name
        self.offset = offset
        msg = f"corrupt section {name!r} at offset {offset}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class IntegrityViolation(ValoriError):
    """Decoded snapshot content violates a canonical-form invariant."""


class ConfigMismatch(ValoriError):
    """Log/snapshot config echo disagrees with the replaying kernel's config."""


class CorruptRecord(ValoriError):
    """A log record failed framing or CRC validation."""

    def __init__(self, index: int, detail: str = ""):
        self.index = index
        msg = f"corrupt log record {index}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class ReplayDivergence(ValoriError):
    """kernel.apply rejected a logged command; the log was tampered with or
    written by an incompatible version."""

    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"replay diverged at record {index}: {cause}")


class IoFailure(ValoriError):
    """Underlying file I/O failed."""


class ParseError(ValoriError):
    """An ingest input file could not be parsed."""

    def __init__(self, line: int, detail: str):
        self.line = line
        super().__init__(f"line {line}: {detail}")
