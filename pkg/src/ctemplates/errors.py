"""Exception hierarchy."""


class CTemplatesError(Exception):
    """Base class for all library errors."""


class DimensionError(CTemplatesError, ValueError):
    pass


class SizeLimitError(CTemplatesError, ValueError):
    pass


class ValidationError(CTemplatesError, ValueError):
    """Invalid user-supplied data. ``field`` names the offending entry when known."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NotObservableAtTarget(ValidationError):
    """The pair (C(0), A(0)) is not observable."""


class DomainError(CTemplatesError, ValueError):
    pass


class GainSingularityError(CTemplatesError, ArithmeticError):
    pass


class DivergenceError(CTemplatesError, ArithmeticError):
    """Simulation produced a non-finite state; ``last_sample`` is the last finite one."""

    def __init__(self, message: str, last_sample=None):
        self.last_sample = last_sample
        super().__init__(message)


class ThetaTooSmallError(CTemplatesError, ValueError):
    pass
