"""Exception types raised across the package."""


class SwitchlinError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SwitchlinError, ValueError):
    """Malformed numeric input (non-finite entries, wrong shapes, bad parameters)."""


class NumericalError(SwitchlinError, ArithmeticError):
    """A numerical kernel failed to converge."""


class OutOfHorizonError(SwitchlinError, ValueError):
    """A time lies beyond the horizon of a finite switching signal."""


class InsufficientDataError(SwitchlinError):
    """A statistic needed for certification is undefined."""


class InvalidSetError(SwitchlinError, ValueError):
    """A requested stabilizing or bad set is not admissible."""


class InfeasibleError(SwitchlinError):
    """A design problem has no solution under the given parameters."""


class InvalidPairingError(SwitchlinError, ValueError):
    """A trajectory does not belong to the system/signal it is checked against."""


class DocumentError(SwitchlinError):
    """A system document could not be parsed or is structurally invalid.

    ``line`` and ``column`` are 1-based when known.
    """

    def __init__(self, message, line=None, column=None, field=None):
        self.message = message
        self.line = line
        self.column = column
        self.field = field
        super().__init__(str(self))

    def __str__(self):
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
            if self.column is not None:
                where.append(f"column {self.column}")
        if self.field:
            where.append(f"field '{self.field}'")
        if where:
            return f"{', '.join(where)}: {self.message}"
        return self.message
