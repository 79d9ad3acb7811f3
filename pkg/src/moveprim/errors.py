"""Exception hierarchy shared across the package."""


class MovePrimError(Exception):
    """Base class for all package errors."""


class ValidationError(MovePrimError, ValueError):
    """Input data or configuration violates a documented contract."""


# ingest
class MalformedHeader(ValidationError):
    pass


class MissingSensorAtTimestamp(ValidationError):
    def __init__(self, t, site):
        super().__init__(f"sensor {site} missing at t={t}")
        self.t = t
        self.site = site


class NonMonotoneTimestamps(ValidationError):
    def __init__(self, row, detail=""):
        super().__init__(f"timestamps not monotone/regular at row {row}{': ' + detail if detail else ''}")
        self.row = row


class OverlapAfterRounding(ValidationError):
    def __init__(self, i, j):
        super().__init__(f"label rows {i} and {j} overlap after conversion to sample indices")
        self.i = i
        self.j = j


class UnknownLabel(ValidationError):
    def __init__(self, row, name):
        super().__init__(f"unknown primitive {name!r} in label row {row}")
        self.row = row
        self.name = name


class UnknownSensor(ValidationError):
    pass


# features
class RecordingTooShort(ValidationError):
    pass


class TooFewSamples(ValidationError):
    pass


class WindowTooShort(ValidationError):
    pass


# classifiers
class DegenerateScatter(ValidationError):
    pass


class MissingClass(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class SingleClass(ValidationError):
    pass


class EmptyModel(ValidationError):
    pass


# evaluation
class LabelTooSmall(ValidationError):
    pass


class SegmentWithoutWindows(ValidationError):
    pass


class NoPredictionsForClass(MovePrimError, ArithmeticError):
    pass


class ClassAbsent(MovePrimError, ArithmeticError):
    pass


class OneClassOnly(ValidationError):
    pass


# search / synth / bench
class BudgetExceeded(MovePrimError):
    pass


class InvalidSpec(ValidationError):
    pass


class MissingClassAtFraction(ValidationError):
    pass


class BelowClockResolution(MovePrimError):
    pass


class IoError(MovePrimError, OSError):
    """A file could not be read or written."""
