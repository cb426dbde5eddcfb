"""
Exception hierarchy for the QELM toolkit.

Every error carries the exit code the CLI returns for it:
1 usage/config, 2 data, 3 numerical failure.
"""

from typing import Optional


class QELMError(Exception):
    """Base error for the toolkit"""

    exit_code = 1


class ConfigError(QELMError):
    exit_code = 1


class SizeError(QELMError, ValueError):
    exit_code = 1


class GateIndexError(QELMError, IndexError):
    exit_code = 1


class DimensionMismatchError(QELMError, ValueError):
    exit_code = 1


class UnsupportedShiftRuleError(QELMError, NotImplementedError):
    exit_code = 1


class DataError(QELMError):
    exit_code = 2


class DatasetParseError(DataError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(DataError, ValueError):
    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class InsufficientDataError(DataError, ValueError):
    exit_code = 2


class NumericalError(QELMError, ArithmeticError):
    exit_code = 3


class AliasingError(NumericalError):
    exit_code = 3
