"""Exception types shared across the package.

The CLI maps these onto process exit codes, so each class carries its own.
"""


class LCCError(Exception):
    exit_code = 1


class InvalidArgumentError(LCCError, ValueError):
    exit_code = 2


class UnsupportedOperationError(LCCError, NotImplementedError):
    exit_code = 2


class PreconditionError(LCCError, ValueError):
    exit_code = 2


class ConsistencyError(LCCError, ValueError):
    exit_code = 3


class DegenerateDataError(LCCError, ValueError):
    exit_code = 4
