"""Exception hierarchy shared by all pyrflow modules."""


class PyrflowError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(PyrflowError):
    """Array dimensions do not satisfy an operation's contract."""


class ValidationError(PyrflowError):
    """Input values are invalid (non-finite, out of range, bad mask)."""


class ConfigError(PyrflowError):
    """A configuration value is inconsistent or unusable."""


class ArchiveError(PyrflowError):
    """Weight archive is malformed, incomplete, or fails its checksum."""


class FlowFormatError(PyrflowError):
    """A flow container has a bad magic number or invalid header."""


class TruncatedFileError(FlowFormatError):
    """A flow container ends before its declared payload."""


class EmptyDomainError(PyrflowError):
    """A metric was requested over zero valid pixels."""
