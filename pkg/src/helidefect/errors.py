"""Exception and warning types raised across the package."""


class HelidefectError(Exception):
    """Base class for all package errors."""


class InvalidField(HelidefectError, ValueError):
    pass


class AsymmetricSpectrum(HelidefectError, ValueError):
    pass


class GridMismatch(HelidefectError, ValueError):
    pass


class FormatError(HelidefectError, ValueError):
    pass


class TruncatedFile(FormatError):
    pass


class OutOfDomain(HelidefectError, ValueError):
    pass


class EpsilonTooLarge(HelidefectError, ValueError):
    pass


class EpsilonUnderResolved(HelidefectError, ValueError):
    pass


class InsufficientData(HelidefectError, ValueError):
    pass


class InvalidParams(HelidefectError, ValueError):
    pass


class CostGuard(HelidefectError, ValueError):
    pass


class DomainMismatch(HelidefectError, ValueError):
    pass


class StepTooLarge(HelidefectError, ValueError):
    pass


class NeedBackwardFlow(HelidefectError, ValueError):
    pass


class InvalidRadius(HelidefectError, ValueError):
    pass


class ShellUnderResolved(HelidefectError, ValueError):
    pass


class ConfigError(HelidefectError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UntrustedTrace(UserWarning):
    """Boundary trace extrapolation residual exceeded its threshold."""


class PoorFit(UserWarning):
    """Log-log regression quality below the accepted R^2."""
