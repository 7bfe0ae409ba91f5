class DomainError(ValueError):
    """An input lies outside the kernel or density domain."""


class NumericError(ArithmeticError):
    """A factorization or solve failed."""


class SingularityError(NumericError):
    """A density vanishes where a quantity needs to divide by it."""


class ConfigError(ValueError):
    """A scenario configuration could not be parsed or validated."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
