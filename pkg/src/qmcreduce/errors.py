"""Exception hierarchy shared by all modules."""


class QmcReduceError(Exception):
    """Base class for errors raised by this package."""


class FormatError(QmcReduceError, ValueError):
    """Input file does not follow the expected layout."""


class LengthError(QmcReduceError, ValueError):
    """Payload is shorter (or longer) than its header announces."""


class RangeError(QmcReduceError, ValueError):
    """A count, index or value lies outside its admissible range."""


class DimensionError(QmcReduceError, ValueError):
    """Array dimensions are incompatible with the requested operation."""


class ShapeError(QmcReduceError, ValueError):
    """Two inputs that must have matching lengths do not."""


class ParameterError(QmcReduceError, ValueError):
    """An algorithm parameter is invalid."""


class DegenerateSplitError(QmcReduceError):
    """A point set cannot be split into two non-empty clusters."""
