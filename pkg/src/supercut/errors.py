"""Exception hierarchy shared across the library.

The CLI maps these onto exit codes: ParameterError -> 1, DataError -> 2,
NumericError -> 3.
"""


class SupercutError(Exception):
    pass


class ParameterError(SupercutError):
    """Invalid argument values (bad k, empty grid, non-positive epsilon, ...)."""


class DataError(SupercutError):
    """Structurally inconsistent data (length mismatches, malformed files)."""


class NumericError(SupercutError):
    """Non-finite inputs or numeric breakdown."""
