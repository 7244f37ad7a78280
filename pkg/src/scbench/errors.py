"""Exception types shared across the package."""


class DataError(Exception):
    """Input data violates a documented contract."""


class FormatError(DataError):
    """An on-disk file cannot be parsed."""
