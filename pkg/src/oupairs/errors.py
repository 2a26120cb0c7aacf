"""Exception types shared across the package."""


class DegenerateInputError(ValueError):
    """Inputs carry no usable signal (e.g. zero variances, constant series)."""


class MomentDegenerateError(DegenerateInputError):
    """Sample moments violate the sign/ordering needed for closed-form inversion."""


class BackTransformError(ValueError):
    """Fitted discrete-time parameters fall outside the invertible domain."""


class DomainError(ValueError):
    """Argument outside the validated domain of a series evaluation."""


class NumericalInconsistencyError(ArithmeticError):
    """Internally inconsistent numerical result (e.g. materially negative variance)."""


class UndefinedMomentsError(ValueError):
    """Strategy moments are undefined (zero-width trading cycle)."""


class InsufficientDataError(ValueError):
    """Too few observations survive to continue the pipeline."""


class InvalidHistoryError(ValueError):
    """Daily parameter history violates its invariants (e.g. nonpositive variance)."""


class CollinearityError(ValueError):
    """Design matrix is unusable (non-finite entries)."""
