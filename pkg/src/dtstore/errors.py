"""Exception hierarchy shared by every layer of the package."""


class DtError(Exception):
    """Base class for all errors raised by dtstore."""


# --- tensor construction and slicing ---

class LengthMismatch(DtError):
    pass


class OutOfBounds(DtError):
    pass


class RangeOutOfBounds(DtError):
    pass


class RankMismatch(DtError):
    pass


class BadTensorId(DtError):
    pass


# --- chunked dense layout ---

class BadChunkDim(DtError):
    pass


class MissingChunk(DtError):
    pass


class InconsistentMeta(DtError):
    pass


class ShapeMismatch(DtError):
    pass


class MergedDimSliced(DtError):
    """A slice touched a dimension that was merged into chunk payloads."""


class UnknownId(DtError):
    pass


# --- sparse layouts ---

class InconsistentShape(DtError):
    pass


class DuplicateCoordinate(DtError):
    pass


class MalformedPointers(DtError):
    pass


class RankTooLow(DtError):
    pass


class BadBlockShape(DtError):
    pass


class DuplicateBlock(DtError):
    pass


# --- table storage ---

class AlreadyExists(DtError):
    pass


class SchemaViolation(DtError):
    pass


class UnknownColumn(DtError):
    pass


class BadMagic(DtError):
    pass


class UnsupportedVersion(DtError):
    pass


class CorruptColumn(DtError):
    """Column payload failed its CRC32 check or could not be decoded."""


# --- benchmarking ---

class DensityTooHigh(DtError):
    pass


class TooLargeForDense(DtError):
    pass


class VerificationFailed(DtError):
    """A decoded tensor did not match its source; timings were discarded."""


# --- command line ---

class ParseError(DtError):
    pass
