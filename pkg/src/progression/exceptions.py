"""Exception hierarchy shared across the package.

Every error raised on purpose derives from :class:`ProgressionError` so
callers (and the command line front end) can map failures to a coarse
category without string matching.
"""


class ProgressionError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ProgressionError, ValueError):
    """Malformed caller input: bad shapes, NaNs, out-of-range options."""


class FitError(ProgressionError, RuntimeError):
    """Estimation failed on data that passed basic validation."""


class InsufficientDataError(FitError):
    """Too few observations for the requested fit."""


class DegenerateDataError(FitError):
    """Data degeneracy (ties, zero spread) prevents a well-defined fit."""


class InternalError(ProgressionError, RuntimeError):
    """An internal invariant was violated; indicates a bug, not bad input."""
