"""Exception types raised across the package."""


class OcvAlignError(Exception):
    """Base class for all package errors."""


class NonMonotonic(OcvAlignError, ValueError):
    pass


class LengthMismatch(OcvAlignError, ValueError):
    pass


class NonFinite(OcvAlignError, ValueError):
    pass


class OutOfRange(OcvAlignError, ValueError):
    """A query fell outside the domain of a curve."""

    def __init__(self, value, lo, hi):
        self.value, self.lo, self.hi = value, lo, hi
        super().__init__(f"{value!r} outside [{lo!r}, {hi!r}]")


class NonPositiveCapacity(OcvAlignError, ValueError):
    pass


class NonMonotonicTime(OcvAlignError, ValueError):
    pass


class MissingOCV(OcvAlignError, ValueError):
    pass


class NoFeasiblePoint(OcvAlignError):
    """Every candidate in the search box maps SOC outside the nominal curve."""


class DegenerateData(OcvAlignError):
    """OCV samples are too flat to identify capacity."""


class WindowTooSmall(OcvAlignError, ValueError):
    pass


class RangeExceeded(OcvAlignError):
    """Simulated SOC left the nominal curve range before the stop SOC."""


class NonPositiveActual(OcvAlignError, ValueError):
    pass


class NoIncludedPoints(OcvAlignError):
    pass


class EmptyInput(OcvAlignError, ValueError):
    pass


class ParseError(OcvAlignError):
    """Malformed input file; ``line`` is 1-based."""

    def __init__(self, message, line=None, column=None, path=None):
        self.line, self.column, self.path = line, column, path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ValidationError(OcvAlignError):
    """File parsed but the content violates a data invariant."""
