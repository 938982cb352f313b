"""
Exception hierarchy for qdistill

Every error raised by the library carries the exit code the command line
reports for it. Only the CLI turns these into exit codes.
"""


class QDistillError(Exception):
    """Base class for all qdistill errors"""

    exit_code = 1


class ConfigError(QDistillError):
    """Invalid configuration value, profile or file"""

    exit_code = 1


class ArgumentError(QDistillError, ValueError):
    """Invalid argument passed to a library function"""

    exit_code = 1


class InputError(QDistillError, ValueError):
    """Input data cannot be processed (empty token sequence, too few examples)"""

    exit_code = 2


class DataError(QDistillError):
    """Corpus or teacher data is missing or inconsistent"""

    exit_code = 2


class FormatError(QDistillError):
    """A file on disk does not have the expected format"""

    exit_code = 2


class NumericalError(QDistillError, ArithmeticError):
    """A non-finite value appeared in a loss, gradient or update"""

    exit_code = 3
