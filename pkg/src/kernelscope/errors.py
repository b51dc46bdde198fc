"""Exception hierarchy.

Everything raised on purpose by this package derives from
:class:`KernelScopeError` so callers (mainly the CLI) can map failures to exit
codes without catching unrelated bugs.
"""


class KernelScopeError(Exception):
    pass


class InvalidModel(KernelScopeError, ValueError):
    """A domain object violates one of its construction invariants."""


class UnknownConfiguration(KernelScopeError, KeyError):
    pass


class IoFailure(KernelScopeError, OSError):
    pass


class ParseError(KernelScopeError, ValueError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason

    def __reduce__(self):
        return (type(self), (self.line, self.reason))


class VersionMismatch(KernelScopeError, ValueError):
    pass


class UnknownEvent(KernelScopeError, ValueError):
    pass


class MissingInstance(KernelScopeError, ValueError):
    pass


class MarkerEventAbsent(KernelScopeError, ValueError):
    pass


class UnpairedMarker(KernelScopeError, ValueError):
    pass


class UnknownAmplitude(KernelScopeError, ValueError):
    pass


class AmbiguousAmplitude(KernelScopeError, ValueError):
    pass


class DegenerateInput(KernelScopeError, ValueError):
    pass


class InconsistentKernelSequence(KernelScopeError, ValueError):
    pass


class SegmentationFailure(KernelScopeError, ValueError):
    pass


class NoReferenceForConfig(KernelScopeError, KeyError):
    pass


class UnregisteredConfig(KernelScopeError, KeyError):
    pass


class InvalidTarget(KernelScopeError, ValueError):
    pass


class MissingMemoryEvents(KernelScopeError, ValueError):
    pass


class CacheCapacityExceeded(KernelScopeError, RuntimeError):
    pass


class ConfigError(KernelScopeError, ValueError):
    """A campaign configuration document is malformed."""
