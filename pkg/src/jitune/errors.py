"""Exception hierarchy shared by the tuning runtime."""

from __future__ import annotations


class TuningError(Exception):
    """Base class for every error raised by jitune."""


class InvalidCandidateSpace(TuningError, ValueError):
    pass


class EmptyCandidateSpace(InvalidCandidateSpace):
    pass


class DuplicateKey(TuningError, KeyError):
    pass


class SpaceMismatch(TuningError, ValueError):
    pass


class OutOfOrderCompletion(TuningError, RuntimeError):
    pass


class NoMeasurements(TuningError, LookupError):
    pass


class Busy(TuningError, RuntimeError):
    """Another call on the same tuning key is in flight."""


class MetricMismatch(TuningError, ValueError):
    pass


class InvalidCandidate(TuningError, IndexError):
    pass


class FactoryFailure(TuningError, RuntimeError):
    pass


class DoubleFinalize(TuningError, RuntimeError):
    pass


class CacheMiss(TuningError, LookupError):
    pass


class InsufficientCalls(TuningError, ValueError):
    pass
