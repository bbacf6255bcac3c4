"""Exception hierarchy for the package.

Everything derives from :class:`OuSamplerError` so callers can catch library
failures with one except clause.  Input and domain problems also derive from
``ValueError`` so they behave like ordinary argument errors.
"""


class OuSamplerError(Exception):
    """Base class for all errors raised by this package."""


class InputError(OuSamplerError, ValueError):
    """A caller supplied an invalid value (non-finite, wrong sign, ...)."""


class DomainError(InputError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(OuSamplerError, OverflowError):
    """The result is not representable in float64 (e.g. exp overflow)."""


class PrecisionError(OuSamplerError):
    """A series or iteration failed to reach the requested tolerance."""


class HitTimeoutError(OuSamplerError):
    """A threshold-hitting simulation exceeded its time cap.

    Carries the simulated time elapsed before the cap fired, which is a hint
    that the threshold sits too far into the stationary tail.
    """

    def __init__(self, message, elapsed):
        super().__init__(message)
        self.elapsed = elapsed


class SolverError(OuSamplerError):
    """A root-finder could not locate or certify a root."""


class ConfigError(OuSamplerError):
    """An experiment configuration file or flag set is invalid."""
