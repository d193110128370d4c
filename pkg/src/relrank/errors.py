"""Exception hierarchy shared across the package."""


class RelrankError(Exception):
    """Base class for all errors raised by this package."""


class DataError(RelrankError):
    """Malformed or inconsistent input data (files, symbols, calendars)."""


class ShapeError(RelrankError):
    """Incompatible array shapes passed to a numerical operation."""


class NumericalError(RelrankError):
    """A computation produced non-finite values or an invalid numeric state."""


class ConfigError(RelrankError):
    """Invalid run configuration (bad keys, missing files, bad modes)."""
