"""Exception hierarchy shared by every module of the package."""


class Dae2CareError(Exception):
    """Base class; the CLI maps every subclass to a machine-readable error."""


class DimensionMismatch(Dae2CareError):
    pass


class NotSymmetric(Dae2CareError):
    pass


class SingularSaddlePoint(Dae2CareError):
    """Raised for a rank-deficient constraint matrix or an indefinite mass matrix."""


class FactorizationFailed(Dae2CareError):
    pass


class SmwSingular(Dae2CareError):
    """The small capacitance matrix of the Woodbury correction is singular."""


class NonConvergent(Dae2CareError):
    """ADI aborted by the step limit or the residual growth guard.

    ``partial`` holds the ADI result with the offending last step removed,
    ``reason`` is ``"max_steps"``, ``"growth"`` or ``"smw"``.
    """

    def __init__(self, message, partial=None, reason="growth"):
        super().__init__(message)
        self.partial = partial
        self.reason = reason


class ArnoldiBreakdown(Dae2CareError):
    pass


class EmptyStableSet(Dae2CareError):
    pass


class NoAdmissibleStep(Dae2CareError):
    pass


class MaxIterations(Dae2CareError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NotStabilizing(Dae2CareError):
    pass


class TooLarge(Dae2CareError):
    pass


class NotStabilizable(Dae2CareError):
    pass


class InvalidSpec(Dae2CareError):
    pass


class ParseError(Dae2CareError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedField(Dae2CareError):
    pass


class ConfigError(Dae2CareError):
    pass
