"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage problems exit 1, data
problems exit 2, and solver non-convergence exits 3.
"""


class EnmklError(Exception):
    """Base class for errors raised by this package."""


class UsageError(EnmklError):
    """Invalid flag combination or out-of-range option value."""


class DataError(EnmklError):
    """Malformed or inconsistent input data.

    Parse errors carry the offending file and line number in the message.
    """


class ConvergenceError(EnmklError):
    """An iterative solver exhausted its update budget without converging."""
