"""Exception types shared across the package."""


class CgrepError(Exception):
    """Base class for all errors raised by cgrep."""


class DataFormatError(CgrepError):
    """A file, table or header violates the documented schema."""


class FitError(CgrepError):
    """An estimator cannot be fit on the given data."""
