"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: usage errors exit 2 (argparse),
ValidationError/ParseError/FormatError/ConfigError exit 3, NumericError exit 4.
"""


class CitesummError(Exception):
    """Base class for all toolkit errors."""


class ParseError(CitesummError):
    """Malformed input record; carries a 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(CitesummError):
    """Input violates a documented contract (bad ids, missing data, ...)."""


class ConfigError(CitesummError):
    """Invalid configuration value."""


class FormatError(CitesummError):
    """Corrupt or unsupported binary file (SEB1 embedding / GSSP checkpoint)."""


class ShapeError(CitesummError):
    """Tensor operands with incompatible shapes."""


class NumericError(CitesummError):
    """Non-finite value produced where a finite one is required."""
