"""Exception hierarchy shared by every module of the package."""


class LieSeriesError(Exception):
    """Base class; ``kind`` is used for machine-readable CLI error lines."""

    kind = "error"


class DimensionError(LieSeriesError, ValueError):
    kind = "dimension"


class RangeError(LieSeriesError, IndexError):
    kind = "range"


class CapacityError(LieSeriesError):
    kind = "capacity"


class SequencingError(LieSeriesError):
    kind = "sequencing"


class AccuracyError(LieSeriesError):
    kind = "accuracy"
