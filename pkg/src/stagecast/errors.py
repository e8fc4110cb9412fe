"""Exception hierarchy shared across the package.

Two bases split the failure modes the CLI cares about: configuration
problems (bad graphs, bad scenario files, unknown kinds) and data or
model problems (unsorted streams, unlabeled traces, unfitted state).
"""

from __future__ import annotations


class ConfigurationError(Exception):
    """A graph, scenario, or parameter document is invalid."""


class DataError(Exception):
    """Input data or model state cannot be processed."""


class MalformedStream(DataError):
    """An event sequence violated its ordering contract."""

    def __init__(self, message: str, source: str = "", index: int = -1):
        super().__init__(message)
        self.source = source
        self.index = index


class UnfittedComponent(DataError):
    """A component required fitted state that was never provided."""


class NoLabels(DataError):
    """A classifier's training stream carried no supervision labels."""


class InsufficientData(DataError):
    """A component's minimum sample requirement was not met."""


class DimensionMismatch(DataError):
    """A vector did not match the dimensionality a model was fitted on."""


class KindMismatch(DataError):
    """An event of the wrong kind reached a component."""


class FatalFormat(DataError):
    """More than half of a file's non-empty lines failed to parse."""


class MissingColumn(DataError):
    """A CSV schema referenced a column absent from the header."""


class UnknownStageName(DataError):
    """A label value is not present in the supplied stage catalog."""


class LengthMismatch(DataError):
    """Paired sequences had different lengths."""


class EmptyInput(DataError):
    """An operation that needs at least one element received none."""


class NoOverlap(DataError):
    """No prediction could be aligned with a labeled event."""


class CatalogMismatch(DataError):
    """Traces and graph disagree on the stage catalog."""


class BadScenario(ConfigurationError):
    """A synthetic scenario violates its invariants."""


class UnknownBenchmark(ConfigurationError):
    """No packaged benchmark has the requested name."""
