"""Exception hierarchy shared by all emopipe modules."""


class EmopipeError(Exception):
    """Base class for every error raised on purpose by this package."""


class DimensionMismatch(EmopipeError, ValueError):
    pass


class EmptyDataset(EmopipeError, ValueError):
    pass


# wire
class WireError(EmopipeError):
    pass


class UnknownTag(WireError):
    pass


class LengthMismatch(WireError):
    pass


class MalformedBody(WireError):
    pass


class ProtocolViolation(WireError):
    pass


class BindFailure(WireError):
    pass


class ConnectFailure(WireError):
    pass


# features
class EmptyPart(EmopipeError, ValueError):
    pass


# nn
class ShapeMismatch(EmopipeError, ValueError):
    pass


class ModelFormatError(EmopipeError):
    pass


class BadMagic(ModelFormatError):
    pass


class UnsupportedVersion(ModelFormatError):
    pass


class TruncatedFile(ModelFormatError):
    pass


class ChecksumMismatch(ModelFormatError):
    pass


# data
class ParseError(EmopipeError, ValueError):
    pass


class DuplicateImageId(EmopipeError, ValueError):
    pass


class InsufficientClassCount(EmopipeError, ValueError):
    pass


# pipeline
class SourceReadError(EmopipeError):
    pass


class NoExtractorConfigured(EmopipeError):
    pass


class ChildStartFailure(EmopipeError):
    pass


class NonzeroChildExit(EmopipeError):
    def __init__(self, codes):
        self.codes = dict(codes)
        failed = ", ".join(f"{name}={code}" for name, code in self.codes.items())
        super().__init__(f"worker(s) exited nonzero: {failed}")


# eval
class InsufficientSamples(EmopipeError, ValueError):
    pass
